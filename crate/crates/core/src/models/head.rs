use rand_chacha::ChaCha8Rng;

use super::binary_cross_entropy;
use crate::numerics::{
    add_bias, add_col_sums, dropout_mask, init_truncated_normal, matmul, sigmoid, Parameter,
    Tensor, Transpose,
};

/// Hidden tanh layer followed by a single sigmoid unit: four consecutive
/// parameters holding hidden weight, hidden bias, output weight and output
/// bias.
pub(crate) fn head_params(input: usize, hidden: usize, std: f64, seeds: &mut impl FnMut() -> u64) -> Vec<Parameter> {
    vec![
        Parameter::new("head.hidden.w", init_truncated_normal(&[input, hidden], 0.0, std, seeds()), true),
        Parameter::new("head.hidden.b", Tensor::zeros(&[hidden]), false),
        Parameter::new("head.out.w", init_truncated_normal(&[hidden, 1], 0.0, std, seeds()), true),
        Parameter::new("head.out.b", Tensor::zeros(&[1]), false),
    ]
}

pub(crate) struct HeadCache {
    rows: usize,
    /// Head input after dropout.
    input: Vec<f64>,
    mask: Option<Vec<f64>>,
    hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

pub(crate) fn head_forward(
    p: &[Parameter],
    h: &[f64],
    rows: usize,
    keep_prob: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> HeadCache {
    let (wh, bh, wo, bo) = (&p[0].value, &p[1].value, &p[2].value, &p[3].value);
    let (k, hid) = (wh.rows(), wh.cols());
    let mask = rng.map(|r| dropout_mask(rows * k, keep_prob, r));
    let input: Vec<f64> = match &mask {
        Some(m) => h.iter().zip(m).map(|(x, m)| x * m).collect(),
        None => h.to_vec(),
    };
    let mut hidden = vec![0.0; rows * hid];
    matmul(&input, Transpose::No, wh.data(), Transpose::No, &mut hidden, rows, k, hid, 0.0);
    add_bias(&mut hidden, bh.data());
    hidden.iter_mut().for_each(|v| *v = v.tanh());
    let mut logits = vec![0.0; rows];
    matmul(&hidden, Transpose::No, wo.data(), Transpose::No, &mut logits, rows, hid, 1, 0.0);
    add_bias(&mut logits, bo.data());
    HeadCache {
        rows,
        input,
        mask,
        hidden,
        logits,
    }
}

/// Accumulates head gradients and returns the gradient with respect to the
/// head input before dropout.
pub(crate) fn head_backward(p: &mut [Parameter], cache: &HeadCache, d_logits: &[f64]) -> Vec<f64> {
    let rows = cache.rows;
    let (k, hid) = (p[0].value.rows(), p[0].value.cols());
    matmul(&cache.hidden, Transpose::Yes, d_logits, Transpose::No, p[2].grad.data_mut(), hid, rows, 1, 1.0);
    p[3].grad.data_mut()[0] += d_logits.iter().sum::<f64>();

    let mut d_hidden = vec![0.0; rows * hid];
    matmul(d_logits, Transpose::No, p[2].value.data(), Transpose::Yes, &mut d_hidden, rows, 1, hid, 0.0);
    d_hidden
        .iter_mut()
        .zip(&cache.hidden)
        .for_each(|(d, q)| *d *= 1.0 - q * q);
    matmul(&cache.input, Transpose::Yes, &d_hidden, Transpose::No, p[0].grad.data_mut(), k, rows, hid, 1.0);
    add_col_sums(p[1].grad.data_mut(), &d_hidden);

    let mut d_input = vec![0.0; rows * k];
    matmul(&d_hidden, Transpose::No, p[0].value.data(), Transpose::Yes, &mut d_input, rows, hid, k, 0.0);
    if let Some(m) = &cache.mask {
        d_input.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
    }
    d_input
}

/// Mean cross-entropy over the batch and its gradient with respect to the
/// logits.
pub(crate) fn bce_batch(logits: &[f64], targets: &[bool]) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    let loss = logits
        .iter()
        .zip(targets)
        .map(|(&s, &y)| binary_cross_entropy(s, y))
        .sum::<f64>()
        / n;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&s, &y)| (sigmoid(s) - if y { 1.0 } else { 0.0 }) / n)
        .collect();
    (loss, grad)
}

/// Deterministic stream of per-parameter seeds.
pub(crate) fn seed_stream(seed: u64) -> impl FnMut() -> u64 {
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || rng.random()
}
