use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Tensor;

fn truncated_standard_normal(rng: &mut impl Rng) -> f64 {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        if x.abs() <= 2.0 {
            return x;
        }
    }
}

/// Normal samples resampled until they fall within two standard deviations
/// of the mean.
pub fn init_truncated_normal(shape: &[usize], mean: f64, std: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| mean + std * truncated_standard_normal(&mut rng))
        .collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

/// Orthonormal columns of an `m × n` matrix with `m >= n`, built by
/// Gram–Schmidt (two passes) over Gaussian columns.
fn orthonormal_columns(m: usize, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    // columns stored contiguously while orthogonalizing
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &cols {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut out = vec![0.0; m * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            out[i * n + j] = *x;
        }
    }
    out
}

/// A random `m × n` matrix with orthonormal columns (`m >= n`) or
/// orthonormal rows (`m < n`).
pub fn init_orthogonal(m: usize, n: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = if m >= n {
        orthonormal_columns(m, n, &mut rng)
    } else {
        let t = orthonormal_columns(n, m, &mut rng);
        let mut out = vec![0.0; m * n];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = t[i * m + j];
            }
        }
        out
    };
    Tensor::from_vec(&[m, n], data).expect("length matches shape")
}
