use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Parameter;

/// Anything that owns a list of trainable parameters.
pub trait HasParams {
    fn params(&self) -> &[Parameter];
    fn params_mut(&mut self) -> &mut [Parameter];
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and element index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares analytic gradients against central finite differences.
///
/// `loss` must zero the gradients, run forward and backward, and return the
/// loss. Tensors with more than `sample_per_tensor` elements are checked on a
/// seeded random subset of that size. The relative error of one element is
/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<M: HasParams>(
    model: &mut M,
    mut loss: impl FnMut(&mut M) -> f64,
    eps: f64,
    sample_per_tensor: usize,
    seed: u64,
) -> GradCheckReport {
    loss(model);
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let indices: Vec<usize> = if n > sample_per_tensor {
            sample(&mut rng, n, sample_per_tensor).into_vec()
        } else {
            (0..n).collect()
        };
        for i in indices {
            let original = model.params()[pi].value.data()[i];
            model.params_mut()[pi].value.data_mut()[i] = original + eps;
            let plus = loss(model);
            model.params_mut()[pi].value.data_mut()[i] = original - eps;
            let minus = loss(model);
            model.params_mut()[pi].value.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grads[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((model.params()[pi].name.clone(), i));
            }
        }
    }
    // leave the analytic gradients in place
    loss(model);
    report
}
