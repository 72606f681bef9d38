use rand_chacha::ChaCha8Rng;

use super::head::{bce_batch, head_backward, head_forward, head_params, seed_stream, HeadCache};
use super::{BinaryModel, TrainConfig, HIDDEN};
use crate::corpus::Post;
use crate::embeddings::SentenceVectorProvider;
use crate::error::{Error, Result};
use crate::numerics::{
    add_bias, add_col_sums, gru_step, init_orthogonal, init_truncated_normal, matmul, sigmoid,
    GruCell, HasParams, Parameter, Tensor, Transpose,
};
use crate::textprep::SentenceSeq;

/// One vector per sentence, in reading order.
#[derive(Debug, Clone, PartialEq)]
pub struct GruInput {
    pub vectors: Tensor,
}

impl GruInput {
    pub fn new(vectors: Tensor) -> Result<Self> {
        if vectors.rows() == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(Self { vectors })
    }

    pub fn from_sentences(seq: &SentenceSeq, provider: &SentenceVectorProvider) -> Result<Self> {
        let dim = provider.dim();
        let mut data = Vec::with_capacity(seq.len() * dim);
        for sentence in seq.sentences() {
            data.extend(provider.embed_sentence(sentence)?);
        }
        Self::new(Tensor::from_vec(&[seq.len(), dim], data)?)
    }

    pub fn from_post(post: &Post, provider: &SentenceVectorProvider) -> Result<Self> {
        Self::from_sentences(&SentenceSeq::of_post(post), provider)
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// GRU over sentence vectors; the last state feeds the tanh/sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct GruClassifier {
    params: Vec<Parameter>,
    input_dim: usize,
    keep_prob: f64,
}

const HEAD_BASE: usize = 9;

struct Step {
    active: usize,
    h_prev: Vec<f64>,
    e: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
}

struct Forward {
    order: Vec<usize>,
    steps: Vec<Step>,
    head: HeadCache,
}

impl GruClassifier {
    pub fn new(input_dim: usize, cfg: &TrainConfig) -> Self {
        let mut seeds = seed_stream(cfg.seed);
        let (h, d, std) = (HIDDEN, input_dim, cfg.init_std);
        let mut params = Vec::new();
        for gate in ["z", "r", "h"] {
            params.push(Parameter::new(format!("gru.w{gate}"), init_orthogonal(h, h, seeds()), true));
            params.push(Parameter::new(format!("gru.u{gate}"), init_truncated_normal(&[d, h], 0.0, std, seeds()), true));
            params.push(Parameter::new(format!("gru.b{gate}"), Tensor::zeros(&[h]), false));
        }
        params.extend(head_params(h, HIDDEN, std, &mut seeds));
        Self {
            params,
            input_dim,
            keep_prob: cfg.keep_prob,
        }
    }

    pub fn from_tensors(input_dim: usize, cfg: &TrainConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(input_dim, cfg);
        super::assign_tensors(&mut model.params, tensors)?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn cell(&self) -> GruCell<'_> {
        let p = &self.params;
        GruCell {
            wz: &p[0].value,
            uz: &p[1].value,
            bz: &p[2].value,
            wr: &p[3].value,
            ur: &p[4].value,
            br: &p[5].value,
            wh: &p[6].value,
            uh: &p[7].value,
            bh: &p[8].value,
        }
    }

    /// Final hidden state computed one step at a time.
    pub fn final_state(&self, input: &GruInput) -> Result<Vec<f64>> {
        let cell = self.cell();
        let mut h = vec![0.0; HIDDEN];
        for t in 0..input.len() {
            h = gru_step(&h, input.vectors.row(t), &cell)?.h;
        }
        Ok(h)
    }

    /// Head output probability for an arbitrary state vector.
    pub fn head_probability(&self, h: &[f64]) -> f64 {
        let cache = head_forward(&self.params[HEAD_BASE..], h, 1, self.keep_prob, None);
        sigmoid(cache.logits[0])
    }

    fn forward(&self, batch: &[&GruInput], rng: Option<&mut ChaCha8Rng>) -> Result<Forward> {
        let (hd, d) = (HIDDEN, self.input_dim);
        for x in batch {
            if x.is_empty() {
                return Err(Error::EmptySequence);
            }
            if x.vectors.cols() != d {
                return Err(Error::ShapeMismatch(format!(
                    "model expects sentence vectors of dim {d}, got {}",
                    x.vectors.cols()
                )));
            }
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(batch[i].len()));
        let rows = batch.len();
        let max_t = order.first().map_or(0, |&i| batch[i].len());
        let p = &self.params;
        let active: Vec<usize> = (0..max_t)
            .map(|t| order.iter().take_while(|&&i| batch[i].len() > t).count())
            .collect();
        let total: usize = active.iter().sum();
        let mut es = Vec::with_capacity(total * d);
        for (t, &a) in active.iter().enumerate() {
            for &i in &order[..a] {
                es.extend_from_slice(batch[i].vectors.row(t));
            }
        }
        let project = |u: usize, b: usize| {
            let mut out = vec![0.0; total * hd];
            matmul(&es, Transpose::No, p[u].value.data(), Transpose::No, &mut out, total, d, hd, 0.0);
            add_bias(&mut out, p[b].value.data());
            out
        };
        let (pz, pr, pc) = (project(1, 2), project(4, 5), project(7, 8));
        let mut h = vec![0.0; rows * hd];
        let mut steps = Vec::with_capacity(max_t);
        let mut offset = 0;
        for &a in &active {
            let rng_h = offset * hd..(offset + a) * hd;
            let e = es[offset * d..(offset + a) * d].to_vec();
            offset += a;
            let h_prev = h[..a * hd].to_vec();
            let gate = |w: usize, proj: &[f64], hin: &[f64]| {
                let mut out = proj[rng_h.clone()].to_vec();
                matmul(hin, Transpose::No, p[w].value.data(), Transpose::No, &mut out, a, hd, hd, 1.0);
                out
            };
            let z: Vec<f64> = gate(0, &pz, &h_prev).into_iter().map(sigmoid).collect();
            let r: Vec<f64> = gate(3, &pr, &h_prev).into_iter().map(sigmoid).collect();
            let rh: Vec<f64> = r.iter().zip(&h_prev).map(|(r, h)| r * h).collect();
            let c: Vec<f64> = gate(6, &pc, &rh).into_iter().map(f64::tanh).collect();
            for j in 0..a * hd {
                h[j] = z[j] * h_prev[j] + (1.0 - z[j]) * c[j];
            }
            steps.push(Step { active: a, h_prev, e, z, r, c });
        }
        let head = head_forward(&p[HEAD_BASE..], &h, rows, self.keep_prob, rng);
        Ok(Forward { order, steps, head })
    }

    fn backward(&mut self, fw: &Forward, d_logits_sorted: &[f64]) {
        let (hd, d) = (HIDDEN, self.input_dim);
        let mut dh = head_backward(&mut self.params[HEAD_BASE..], &fw.head, d_logits_sorted);
        let p = &mut self.params;
        let total: usize = fw.steps.iter().map(|s| s.active).sum();
        let (mut hs, mut es) = (Vec::with_capacity(total * hd), Vec::with_capacity(total * d));
        let (mut rhs, mut dzs, mut drs, mut dcs) = (
            Vec::with_capacity(total * hd),
            Vec::with_capacity(total * hd),
            Vec::with_capacity(total * hd),
            Vec::with_capacity(total * hd),
        );
        for s in fw.steps.iter().rev() {
            let a = s.active;
            let n = a * hd;
            let mut dz = vec![0.0; n];
            let mut dc = vec![0.0; n];
            let mut dprev = vec![0.0; n];
            for j in 0..n {
                dz[j] = dh[j] * (s.h_prev[j] - s.c[j]) * s.z[j] * (1.0 - s.z[j]);
                dc[j] = dh[j] * (1.0 - s.z[j]) * (1.0 - s.c[j] * s.c[j]);
                dprev[j] = dh[j] * s.z[j];
            }
            let mut drh = vec![0.0; n];
            matmul(&dc, Transpose::No, p[6].value.data(), Transpose::Yes, &mut drh, a, hd, hd, 0.0);
            let mut dr = vec![0.0; n];
            for j in 0..n {
                dr[j] = drh[j] * s.h_prev[j] * s.r[j] * (1.0 - s.r[j]);
                dprev[j] += drh[j] * s.r[j];
            }
            matmul(&dz, Transpose::No, p[0].value.data(), Transpose::Yes, &mut dprev, a, hd, hd, 1.0);
            matmul(&dr, Transpose::No, p[3].value.data(), Transpose::Yes, &mut dprev, a, hd, hd, 1.0);
            dh[..n].copy_from_slice(&dprev);

            rhs.extend(s.r.iter().zip(&s.h_prev).map(|(r, h)| r * h));
            hs.extend_from_slice(&s.h_prev);
            es.extend_from_slice(&s.e);
            dzs.extend_from_slice(&dz);
            drs.extend_from_slice(&dr);
            dcs.extend_from_slice(&dc);
        }
        for (x, dx, w, u, b) in [(&hs, &dzs, 0, 1, 2), (&hs, &drs, 3, 4, 5), (&rhs, &dcs, 6, 7, 8)] {
            matmul(x, Transpose::Yes, dx, Transpose::No, p[w].grad.data_mut(), hd, total, hd, 1.0);
            matmul(&es, Transpose::Yes, dx, Transpose::No, p[u].grad.data_mut(), d, total, hd, 1.0);
            add_col_sums(p[b].grad.data_mut(), dx);
        }
    }
}

impl HasParams for GruClassifier {
    fn params(&self) -> &[Parameter] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }
}

impl BinaryModel for GruClassifier {
    type Input = GruInput;

    fn loss_and_grad(&mut self, batch: &[&GruInput], targets: &[bool], rng: Option<&mut ChaCha8Rng>) -> Result<f64> {
        let fw = self.forward(batch, rng)?;
        let sorted_targets: Vec<bool> = fw.order.iter().map(|&i| targets[i]).collect();
        let (loss, d_logits) = bce_batch(&fw.head.logits, &sorted_targets);
        self.backward(&fw, &d_logits);
        Ok(loss)
    }

    fn predict_batch(&self, batch: &[&GruInput]) -> Result<Vec<f64>> {
        let fw = self.forward(batch, None)?;
        let mut out = vec![0.0; batch.len()];
        for (row, &i) in fw.order.iter().enumerate() {
            out[i] = sigmoid(fw.head.logits[row]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use rand::{Rng, SeedableRng};

    fn seq(len: usize, dim: usize, rng: &mut impl Rng) -> GruInput {
        GruInput::new(Tensor::from_vec(&[len, dim], (0..len * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .unwrap()
    }

    fn grad_error(lens: &[usize]) -> f64 {
        let cfg = TrainConfig { init_std: 0.3, seed: 4, ..Default::default() };
        let mut model = GruClassifier::new(5, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<GruInput> = lens.iter().map(|&t| seq(t, 5, &mut rng)).collect();
        let batch: Vec<&GruInput> = xs.iter().collect();
        let targets: Vec<bool> = (0..xs.len()).map(|i| i % 2 == 1).collect();
        grad_check(
            &mut model,
            |m| {
                m.params_mut().iter_mut().for_each(Parameter::zero_grad);
                m.loss_and_grad(&batch, &targets, None).unwrap()
            },
            1e-6,
            40,
            6,
        )
        .max_relative_error
    }

    #[test]
    fn gradients_match_finite_differences() {
        assert!(grad_error(&[1]) < 1e-4);
        assert!(grad_error(&[5]) < 1e-4);
        assert!(grad_error(&[2, 5, 1, 3]) < 1e-4);
    }

    #[test]
    fn single_step_then_head() {
        let model = GruClassifier::new(3, &TrainConfig { init_std: 0.4, ..Default::default() });
        let x = seq(1, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let h = gru_step(&[0.0; HIDDEN], x.vectors.row(0), &model.cell()).unwrap().h;
        let p = model.predict_batch(&[&x]).unwrap()[0];
        assert!((p - model.head_probability(&h)).abs() < 1e-12);
    }

    #[test]
    fn batched_matches_stepwise() {
        let model = GruClassifier::new(3, &TrainConfig { init_std: 0.4, ..Default::default() });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<GruInput> = [3, 7, 1, 4].iter().map(|&t| seq(t, 3, &mut rng)).collect();
        let probs = model.predict_batch(&xs.iter().collect::<Vec<_>>()).unwrap();
        for (x, p) in xs.iter().zip(probs) {
            let reference = model.head_probability(&model.final_state(x).unwrap());
            assert!((p - reference).abs() < 1e-12);
        }
    }

    #[test]
    fn order_matters() {
        let model = GruClassifier::new(3, &TrainConfig { init_std: 0.5, seed: 3, ..Default::default() });
        let x = seq(4, 3, &mut ChaCha8Rng::seed_from_u64(3));
        let mut rows: Vec<f64> = Vec::new();
        for t in (0..4).rev() {
            rows.extend_from_slice(x.vectors.row(t));
        }
        let reversed = GruInput::new(Tensor::from_vec(&[4, 3], rows).unwrap()).unwrap();
        let (a, b) = (model.predict_batch(&[&x]).unwrap()[0], model.predict_batch(&[&reversed]).unwrap()[0]);
        assert_ne!(a, b);
    }

    #[test]
    fn saturated_update_gate_keeps_zero_state() {
        let mut model = GruClassifier::new(3, &TrainConfig::default());
        model.params[2].value.fill(60.0);
        let x = seq(5, 3, &mut ChaCha8Rng::seed_from_u64(4));
        let h = model.final_state(&x).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
        let p = model.predict_batch(&[&x]).unwrap()[0];
        assert_eq!(p, model.head_probability(&[0.0; HIDDEN]));
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(matches!(GruInput::new(Tensor::zeros(&[0, 3])), Err(Error::EmptySequence)));
    }
}
