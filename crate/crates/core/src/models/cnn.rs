use rand_chacha::ChaCha8Rng;

use super::head::{bce_batch, head_backward, head_forward, head_params, seed_stream};
use super::{BinaryModel, TrainConfig, CONV_MAPS, CONV_WIDTHS, HIDDEN};
use crate::corpus::Post;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{
    add_bias, add_col_sums, conv_pool_backward, init_truncated_normal, matmul, sigmoid,
    HasParams, Parameter, PooledFeatures, Tensor, Transpose,
};
use crate::textprep::field_tokens;

/// Embedded problem and negative-take fields of one post.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnInput {
    pub problem: Tensor,
    pub negative: Tensor,
}

impl CnnInput {
    pub fn new(problem: Tensor, negative: Tensor) -> Result<Self> {
        if problem.rows() == 0 && negative.rows() == 0 {
            return Err(Error::EmptyInput);
        }
        if problem.cols() != negative.cols() {
            return Err(Error::ShapeMismatch(format!(
                "field widths differ: {} vs {}",
                problem.cols(),
                negative.cols()
            )));
        }
        Ok(Self { problem, negative })
    }

    pub fn from_tokens(problem: &[String], negative: &[String], emb: &EmbeddingMatrix) -> Result<Self> {
        Self::new(emb.embed_tokens(problem), emb.embed_tokens(negative))
    }

    pub fn from_post(post: &Post, emb: &EmbeddingMatrix) -> Result<Self> {
        let (p, n) = field_tokens(post);
        Self::from_tokens(&p, &n, emb)
    }

    pub fn dim(&self) -> usize {
        self.problem.cols()
    }
}

/// Convolution, max-pooling and gating over two text fields, followed by
/// the tanh/sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedCnn {
    params: Vec<Parameter>,
    dim: usize,
    shared: bool,
    keep_prob: f64,
}

const PER_BANK: usize = 2 * CONV_WIDTHS.len();

struct FieldPass {
    values: Vec<f64>,
    pooled: Vec<PooledFeatures>,
}

impl GatedCnn {
    pub fn new(dim: usize, cfg: &TrainConfig) -> Self {
        let mut seeds = seed_stream(cfg.seed);
        let banks = if cfg.shared_filters { 1 } else { 2 };
        let mut params = Vec::new();
        for bank in 0..banks {
            let prefix = if bank == 0 { "" } else { "neg." };
            for w in CONV_WIDTHS {
                params.push(Parameter::new(
                    format!("{prefix}conv{w}.w"),
                    init_truncated_normal(&[w * dim, CONV_MAPS], 0.0, cfg.init_std, seeds()),
                    true,
                ));
                params.push(Parameter::new(format!("{prefix}conv{w}.b"), Tensor::zeros(&[CONV_MAPS]), false));
            }
        }
        let k = HIDDEN;
        params.push(Parameter::new("gate.wp", init_truncated_normal(&[k, k], 0.0, cfg.init_std, seeds()), true));
        params.push(Parameter::new("gate.wn", init_truncated_normal(&[k, k], 0.0, cfg.init_std, seeds()), true));
        params.push(Parameter::new("gate.b", Tensor::zeros(&[k]), false));
        params.extend(head_params(k, HIDDEN, cfg.init_std, &mut seeds));
        Self {
            params,
            dim,
            shared: cfg.shared_filters,
            keep_prob: cfg.keep_prob,
        }
    }

    /// Rebuilds a model from named tensors, e.g. a loaded checkpoint.
    pub fn from_tensors(dim: usize, cfg: &TrainConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(dim, cfg);
        super::assign_tensors(&mut model.params, tensors)?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shared_filters(&self) -> bool {
        self.shared
    }

    fn banks(&self) -> usize {
        if self.shared {
            1
        } else {
            2
        }
    }

    fn gate_base(&self) -> usize {
        self.banks() * PER_BANK
    }

    fn encode_field(&self, bank: usize, xs: &[&Tensor]) -> FieldPass {
        let d = self.dim;
        let feats = CONV_MAPS * CONV_WIDTHS.len();
        let mut values = vec![0.0; xs.len() * feats];
        let mut pooled: Vec<PooledFeatures> = (0..xs.len()).map(|_| PooledFeatures::zeros(feats)).collect();
        for (k, &w) in CONV_WIDTHS.iter().enumerate() {
            let weight = &self.params[bank * PER_BANK + 2 * k].value;
            let bias = &self.params[bank * PER_BANK + 2 * k + 1].value;
            let positions: Vec<usize> = xs
                .iter()
                .map(|x| if x.rows() == 0 { 0 } else { x.rows().max(w) - w + 1 })
                .collect();
            let total: usize = positions.iter().sum();
            if total == 0 {
                continue;
            }
            let mut cols = vec![0.0; total * w * d];
            let mut row = 0;
            for (x, &n_pos) in xs.iter().zip(&positions) {
                for t in 0..n_pos {
                    crate::numerics::conv_window(x, t, w, &mut cols[(row + t) * w * d..(row + t + 1) * w * d]);
                }
                row += n_pos;
            }
            let mut out = vec![0.0; total * CONV_MAPS];
            matmul(&cols, Transpose::No, weight.data(), Transpose::No, &mut out, total, w * d, CONV_MAPS, 0.0);
            add_bias(&mut out, bias.data());
            out.iter_mut().for_each(|v| *v = v.max(0.0));

            let mut row = 0;
            for (b, &n_pos) in positions.iter().enumerate() {
                for j in 0..CONV_MAPS {
                    let mut best: Option<(usize, f64)> = None;
                    for t in 0..n_pos {
                        let v = out[(row + t) * CONV_MAPS + j];
                        if best.is_none_or(|(_, bv)| v > bv) {
                            best = Some((t, v));
                        }
                    }
                    if let Some((t, v)) = best {
                        let f = k * CONV_MAPS + j;
                        values[b * feats + f] = v;
                        pooled[b].values[f] = v;
                        pooled[b].argmax[f] = Some(t);
                    }
                }
                row += n_pos;
            }
        }
        FieldPass { values, pooled }
    }

    fn check_inputs(&self, batch: &[&CnnInput]) -> Result<()> {
        for x in batch {
            if x.problem.rows() == 0 && x.negative.rows() == 0 {
                return Err(Error::EmptyInput);
            }
            if x.dim() != self.dim {
                return Err(Error::ShapeMismatch(format!(
                    "model expects embedding dim {}, got {}",
                    self.dim,
                    x.dim()
                )));
            }
        }
        Ok(())
    }

    fn forward(&self, batch: &[&CnnInput], rng: Option<&mut ChaCha8Rng>) -> Result<Forward> {
        self.check_inputs(batch)?;
        let rows = batch.len();
        let k = HIDDEN;
        let problems: Vec<&Tensor> = batch.iter().map(|x| &x.problem).collect();
        let negatives: Vec<&Tensor> = batch.iter().map(|x| &x.negative).collect();
        let p = self.encode_field(0, &problems);
        let n = self.encode_field(self.banks() - 1, &negatives);

        let g0 = self.gate_base();
        let mut g = vec![0.0; rows * k];
        matmul(&p.values, Transpose::No, self.params[g0].value.data(), Transpose::No, &mut g, rows, k, k, 0.0);
        matmul(&n.values, Transpose::No, self.params[g0 + 1].value.data(), Transpose::No, &mut g, rows, k, k, 1.0);
        add_bias(&mut g, self.params[g0 + 2].value.data());
        g.iter_mut().for_each(|v| *v = sigmoid(*v));
        let h: Vec<f64> = (0..rows * k)
            .map(|i| g[i] * p.values[i] + (1.0 - g[i]) * n.values[i])
            .collect();
        let head = head_forward(&self.params[g0 + 3..], &h, rows, self.keep_prob, rng);
        Ok(Forward { p, n, g, head })
    }

    fn backward(&mut self, batch: &[&CnnInput], fw: &Forward, d_logits: &[f64]) {
        let rows = batch.len();
        let k = HIDDEN;
        let g0 = self.gate_base();
        let dh = head_backward(&mut self.params[g0 + 3..], &fw.head, d_logits);

        let (pv, nv, g) = (&fw.p.values, &fw.n.values, &fw.g);
        let da: Vec<f64> = (0..rows * k)
            .map(|i| dh[i] * (pv[i] - nv[i]) * g[i] * (1.0 - g[i]))
            .collect();
        matmul(pv, Transpose::Yes, &da, Transpose::No, self.params[g0].grad.data_mut(), k, rows, k, 1.0);
        matmul(nv, Transpose::Yes, &da, Transpose::No, self.params[g0 + 1].grad.data_mut(), k, rows, k, 1.0);
        add_col_sums(self.params[g0 + 2].grad.data_mut(), &da);

        let mut dp: Vec<f64> = (0..rows * k).map(|i| dh[i] * g[i]).collect();
        let mut dn: Vec<f64> = (0..rows * k).map(|i| dh[i] * (1.0 - g[i])).collect();
        matmul(&da, Transpose::No, self.params[g0].value.data(), Transpose::Yes, &mut dp, rows, k, k, 1.0);
        matmul(&da, Transpose::No, self.params[g0 + 1].value.data(), Transpose::Yes, &mut dn, rows, k, k, 1.0);

        let neg_bank = self.banks() - 1;
        let d = self.dim;
        let mut transposed: Vec<Vec<f64>> =
            (0..self.banks() * CONV_WIDTHS.len()).map(|i| vec![0.0; CONV_WIDTHS[i % CONV_WIDTHS.len()] * d * CONV_MAPS]).collect();
        for (bank, field, d_field, is_problem) in [(0, &fw.p, &dp, true), (neg_bank, &fw.n, &dn, false)] {
            let mut grads: Vec<(&mut [f64], &mut [f64])> = transposed[bank * CONV_WIDTHS.len()..]
                .iter_mut()
                .zip(self.params[bank * PER_BANK..(bank + 1) * PER_BANK].chunks_exact_mut(2))
                .map(|(dw_t, pair)| (dw_t.as_mut_slice(), pair[1].grad.data_mut()))
                .collect();
            for (b, x) in batch.iter().enumerate() {
                let x = if is_problem { &x.problem } else { &x.negative };
                if x.rows() == 0 {
                    continue;
                }
                conv_pool_backward(x, &CONV_WIDTHS, &field.pooled[b], &d_field[b * k..(b + 1) * k], &mut grads);
            }
        }
        for (i, dw_t) in transposed.iter().enumerate() {
            let (bank, kw) = (i / CONV_WIDTHS.len(), i % CONV_WIDTHS.len());
            let dw = self.params[bank * PER_BANK + 2 * kw].grad.data_mut();
            let rows = CONV_WIDTHS[kw] * d;
            for j in 0..CONV_MAPS {
                for r in 0..rows {
                    dw[r * CONV_MAPS + j] += dw_t[j * rows + r];
                }
            }
        }
    }
}

struct Forward {
    p: FieldPass,
    n: FieldPass,
    g: Vec<f64>,
    head: super::head::HeadCache,
}

impl HasParams for GatedCnn {
    fn params(&self) -> &[Parameter] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }
}

impl BinaryModel for GatedCnn {
    type Input = CnnInput;

    fn loss_and_grad(&mut self, batch: &[&CnnInput], targets: &[bool], rng: Option<&mut ChaCha8Rng>) -> Result<f64> {
        let fw = self.forward(batch, rng)?;
        let (loss, d_logits) = bce_batch(&fw.head.logits, targets);
        self.backward(batch, &fw, &d_logits);
        Ok(loss)
    }

    fn predict_batch(&self, batch: &[&CnnInput]) -> Result<Vec<f64>> {
        Ok(self.forward(batch, None)?.head.logits.into_iter().map(sigmoid).collect())
    }
}
