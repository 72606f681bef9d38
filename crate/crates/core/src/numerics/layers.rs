use rand::Rng;

use super::ops::{add_bias, matmul, sigmoid, Transpose};
use super::Tensor;
use crate::error::{Error, Result};

/// Filter bank for one window width: `weight` is `(width · d) × maps`.
#[derive(Debug, Clone, Copy)]
pub struct ConvFilters<'a> {
    pub width: usize,
    pub weight: &'a Tensor,
    pub bias: &'a Tensor,
}

impl ConvFilters<'_> {
    pub fn maps(&self) -> usize {
        self.weight.cols()
    }
}

/// Rows `t .. t + width` of `x` flattened, with zeros past the end.
pub(crate) fn window(x: &Tensor, t: usize, width: usize, out: &mut [f64]) {
    let d = x.cols();
    let rows = x.rows();
    for k in 0..width {
        let dst = &mut out[k * d..(k + 1) * d];
        if t + k < rows {
            dst.copy_from_slice(x.row(t + k));
        } else {
            dst.fill(0.0);
        }
    }
}

/// Narrow convolution with ReLU. For each filter bank of width `w` the
/// output is `positions × maps` with `positions = max(T, w) − w + 1`;
/// sequences shorter than `w` are zero-padded to length `w`.
pub fn conv_encode(x: &Tensor, filters: &[ConvFilters<'_>]) -> Result<Vec<Tensor>> {
    let (t_len, d) = (x.rows(), x.cols());
    if x.shape().len() != 2 || t_len == 0 {
        return Err(Error::ShapeMismatch(format!(
            "convolution input must be a non-empty T × d matrix, got {:?}",
            x.shape()
        )));
    }
    filters
        .iter()
        .map(|f| {
            let (w, maps) = (f.width, f.maps());
            if f.weight.rows() != w * d || f.bias.len() != maps {
                return Err(Error::ShapeMismatch(format!(
                    "width-{w} filters are {:?} with bias {:?}, input dim {d}",
                    f.weight.shape(),
                    f.bias.shape()
                )));
            }
            let positions = t_len.max(w) - w + 1;
            let mut cols = vec![0.0; positions * w * d];
            for (t, dst) in cols.chunks_exact_mut(w * d).enumerate() {
                window(x, t, w, dst);
            }
            let mut out = vec![0.0; positions * maps];
            matmul(
                &cols,
                Transpose::No,
                f.weight.data(),
                Transpose::No,
                &mut out,
                positions,
                w * d,
                maps,
                0.0,
            );
            add_bias(&mut out, f.bias.data());
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            Tensor::from_vec(&[positions, maps], out)
        })
        .collect()
}

/// Max-pooled features plus the winning time step of each feature.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeatures {
    pub values: Vec<f64>,
    /// `None` when every position of the map was masked.
    pub argmax: Vec<Option<usize>>,
}

impl PooledFeatures {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            argmax: vec![None; len],
        }
    }
}

/// Per-feature max over the first `valid[i]` positions of `maps[i]`,
/// concatenated across maps. Fully masked features pool to zero.
pub fn max_pool_time(maps: &[Tensor], valid: &[usize]) -> PooledFeatures {
    assert_eq!(maps.len(), valid.len(), "one valid length per feature map");
    let total: usize = maps.iter().map(Tensor::cols).sum();
    let mut pooled = PooledFeatures::zeros(total);
    let mut offset = 0;
    for (map, &n_valid) in maps.iter().zip(valid) {
        let n_valid = n_valid.min(map.rows());
        for j in 0..map.cols() {
            let best = (0..n_valid)
                .map(|t| (t, map.at(t, j)))
                .fold(None, |acc: Option<(usize, f64)>, (t, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((t, v)),
                });
            if let Some((t, v)) = best {
                pooled.values[offset + j] = v;
                pooled.argmax[offset + j] = Some(t);
            }
        }
        offset += map.cols();
    }
    pooled
}

/// Gradient of pooled features back to the filter banks. Only the winning
/// window of each active (positive) feature contributes. Weight gradients
/// are accumulated transposed, `maps × (w · d)`.
pub(crate) fn conv_pool_backward(
    x: &Tensor,
    widths: &[usize],
    pooled: &PooledFeatures,
    d_pooled: &[f64],
    grads: &mut [(&mut [f64], &mut [f64])],
) {
    let d = x.cols();
    let mut offset = 0;
    for (k, &w) in widths.iter().enumerate() {
        let (dw_t, db) = &mut grads[k];
        let maps = db.len();
        for j in 0..maps {
            let i = offset + j;
            let g = d_pooled[i];
            let Some(t) = pooled.argmax[i] else { continue };
            if g == 0.0 || pooled.values[i] <= 0.0 {
                continue;
            }
            let rows = &x.data()[t * d..(t + w).min(x.rows()) * d];
            let dst = &mut dw_t[j * w * d..j * w * d + rows.len()];
            dst.iter_mut().zip(rows).for_each(|(a, xv)| *a += xv * g);
            db[j] += g;
        }
        offset += maps;
    }
}

/// GRU weights in row-vector convention: `W*` are `H × H`, `U*` are
/// `D × H`, biases have length `H`.
#[derive(Debug, Clone, Copy)]
pub struct GruCell<'a> {
    pub wz: &'a Tensor,
    pub uz: &'a Tensor,
    pub bz: &'a Tensor,
    pub wr: &'a Tensor,
    pub ur: &'a Tensor,
    pub br: &'a Tensor,
    pub wh: &'a Tensor,
    pub uh: &'a Tensor,
    pub bh: &'a Tensor,
}

impl GruCell<'_> {
    pub fn hidden(&self) -> usize {
        self.wz.cols()
    }

    pub fn input(&self) -> usize {
        self.uz.rows()
    }

    pub(crate) fn check(&self) -> Result<()> {
        let (h, d) = (self.hidden(), self.input());
        let square = [self.wz, self.wr, self.wh]
            .iter()
            .all(|w| w.shape() == [h, h]);
        let input = [self.uz, self.ur, self.uh].iter().all(|u| u.shape() == [d, h]);
        let bias = [self.bz, self.br, self.bh].iter().all(|b| b.len() == h);
        if square && input && bias {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "inconsistent GRU weights for hidden size {h}, input size {d}"
            )))
        }
    }
}

/// Intermediate values of one recurrent step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStepCache {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

fn affine2(a: &[f64], wa: &Tensor, b: &[f64], wb: &Tensor, bias: &Tensor) -> Vec<f64> {
    let n = bias.len();
    let mut out = bias.data().to_vec();
    matmul(a, Transpose::No, wa.data(), Transpose::No, &mut out, 1, a.len(), n, 1.0);
    matmul(b, Transpose::No, wb.data(), Transpose::No, &mut out, 1, b.len(), n, 1.0);
    out
}

/// One GRU update:
/// `z = σ(h W_z + e U_z + b_z)`, `r = σ(h W_r + e U_r + b_r)`,
/// `c = tanh((r ⊙ h) W + e U + b_h)`, `h' = z ⊙ h + (1 − z) ⊙ c`.
pub fn gru_step(h_prev: &[f64], e: &[f64], cell: &GruCell<'_>) -> Result<GruStepCache> {
    cell.check()?;
    if h_prev.len() != cell.hidden() || e.len() != cell.input() {
        return Err(Error::ShapeMismatch(format!(
            "GRU step got h of {} and e of {}, expected {} and {}",
            h_prev.len(),
            e.len(),
            cell.hidden(),
            cell.input()
        )));
    }
    let z: Vec<f64> = affine2(h_prev, cell.wz, e, cell.uz, cell.bz)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = affine2(h_prev, cell.wr, e, cell.ur, cell.br)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let candidate: Vec<f64> = affine2(&rh, cell.wh, e, cell.uh, cell.bh)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let h = z
        .iter()
        .zip(h_prev)
        .zip(&candidate)
        .map(|((z, h), c)| z * h + (1.0 - z) * c)
        .collect();
    Ok(GruStepCache { z, r, candidate, h })
}

/// Inverted-dropout mask: each entry is `1 / keep_prob` with probability
/// `keep_prob`, else 0.
pub fn dropout_mask(len: usize, keep_prob: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!(keep_prob > 0.0 && keep_prob <= 1.0, "keep_prob must be in (0, 1]");
    if keep_prob >= 1.0 {
        return vec![1.0; len];
    }
    (0..len)
        .map(|_| {
            if rng.random_bool(keep_prob) {
                1.0 / keep_prob
            } else {
                0.0
            }
        })
        .collect()
}

pub fn dropout(x: &[f64], keep_prob: f64, training: bool, rng: &mut impl Rng) -> Vec<f64> {
    if !training || keep_prob >= 1.0 {
        return x.to_vec();
    }
    dropout_mask(x.len(), keep_prob, rng)
        .into_iter()
        .zip(x)
        .map(|(m, v)| m * v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::init_truncated_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: f64) -> Tensor {
        Tensor::from_vec(shape, vec![v; shape.iter().product()]).unwrap()
    }

    #[test]
    fn conv_hand_example() {
        let x = t(&[3, 2], 0.5);
        let (w, b) = (t(&[4, 1], 1.0), t(&[1], 0.0));
        let maps = conv_encode(&x, &[ConvFilters { width: 2, weight: &w, bias: &b }]).unwrap();
        assert_eq!(maps[0].shape(), [2, 1]);
        assert!(maps[0].data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn conv_zero_input_and_padding() {
        let (w, b) = (t(&[6, 3], 0.7), t(&[3], 0.0));
        let maps = conv_encode(&t(&[5, 2], 0.0), &[ConvFilters { width: 3, weight: &w, bias: &b }])
            .unwrap();
        assert!(maps[0].data().iter().all(|&v| v == 0.0));

        let (w2, b2) = (t(&[4, 1], 1.0), t(&[1], 0.0));
        let maps = conv_encode(&t(&[1, 2], 1.0), &[ConvFilters { width: 2, weight: &w2, bias: &b2 }])
            .unwrap();
        assert_eq!(maps[0].shape(), [1, 1]);
        assert_eq!(maps[0].data()[0], 2.0);
    }

    #[test]
    fn conv_shape_mismatch() {
        let (w, b) = (t(&[5, 1], 1.0), t(&[1], 0.0));
        assert!(matches!(
            conv_encode(&t(&[3, 2], 1.0), &[ConvFilters { width: 2, weight: &w, bias: &b }]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn pooling_examples() {
        let map = Tensor::from_vec(&[3, 1], vec![1.0, 3.0, 2.0]).unwrap();
        let p = max_pool_time(std::slice::from_ref(&map), &[3]);
        assert_eq!(p.values, [3.0]);
        assert_eq!(p.argmax, [Some(1)]);
        let p = max_pool_time(std::slice::from_ref(&map), &[0]);
        assert_eq!(p.values, [0.0]);
        assert_eq!(p.argmax, [None]);
    }

    #[test]
    fn pooled_dim_is_150_for_any_length() {
        let d = 4;
        let banks: Vec<(usize, Tensor, Tensor)> = [2, 3, 4]
            .iter()
            .map(|&w| (w, init_truncated_normal(&[w * d, 50], 0.0, 0.1, w as u64), Tensor::zeros(&[50])))
            .collect();
        let filters: Vec<ConvFilters> = banks
            .iter()
            .map(|(w, wt, b)| ConvFilters { width: *w, weight: wt, bias: b })
            .collect();
        for len in [1, 2, 7, 30] {
            let x = init_truncated_normal(&[len, d], 0.0, 1.0, len as u64);
            let maps = conv_encode(&x, &filters).unwrap();
            let valid: Vec<usize> = maps.iter().map(Tensor::rows).collect();
            assert_eq!(max_pool_time(&maps, &valid).values.len(), 150);
        }
    }

    fn scalar_cell(w: f64) -> [Tensor; 9] {
        [
            t(&[1, 1], w), t(&[1, 1], w), t(&[1], 0.0),
            t(&[1, 1], w), t(&[1, 1], w), t(&[1], 0.0),
            t(&[1, 1], w), t(&[1, 1], w), t(&[1], 0.0),
        ]
    }

    fn cell(p: &[Tensor; 9]) -> GruCell<'_> {
        GruCell {
            wz: &p[0], uz: &p[1], bz: &p[2],
            wr: &p[3], ur: &p[4], br: &p[5],
            wh: &p[6], uh: &p[7], bh: &p[8],
        }
    }

    #[test]
    fn gru_scalar_worked_example() {
        let p = scalar_cell(0.5);
        let out = gru_step(&[0.0], &[1.0], &cell(&p)).unwrap();
        assert!((out.z[0] - 0.6225).abs() < 1e-4);
        assert!((out.candidate[0] - 0.4621).abs() < 1e-4);
        assert!((out.h[0] - 0.1745).abs() < 1e-4);
        // exact composition
        let z = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((out.h[0] - (1.0 - z) * 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn gru_forced_update_gate_keeps_state() {
        let mut p = scalar_cell(0.3);
        p[2] = t(&[1], 50.0);
        let out = gru_step(&[0.8], &[-2.0], &cell(&p)).unwrap();
        assert_eq!(out.h, [0.8]);
    }

    #[test]
    fn gru_zero_gate_from_zero_state() {
        let mut p = scalar_cell(0.3);
        p[2] = t(&[1], -50.0);
        p[8] = t(&[1], 0.2);
        let out = gru_step(&[0.0], &[1.5], &cell(&p)).unwrap();
        assert!((out.h[0] - (0.3f64 * 1.5 + 0.2).tanh()).abs() < 1e-15);
    }

    #[test]
    fn gru_shape_errors() {
        let p = scalar_cell(0.3);
        assert!(matches!(gru_step(&[0.0, 1.0], &[1.0], &cell(&p)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [1.0, -2.0, 3.0];
        assert_eq!(dropout(&x, 1.0, true, &mut rng), x);
        assert_eq!(dropout(&x, 0.3, false, &mut rng), x);
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = [2.0, -1.0, 0.5];
        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            for (s, v) in sums.iter_mut().zip(dropout(&x, 0.8, true, &mut rng)) {
                *s += v;
            }
        }
        for (s, v) in sums.iter().zip(x) {
            assert!((s / n as f64 - v).abs() < 0.01 * v.abs());
        }
    }

    proptest::proptest! {
        #[test]
        fn gru_output_is_convex_combination(
            vals in proptest::collection::vec(-3.0f64..3.0, 9 * 4 + 6),
        ) {
            // H = 2, D = 2
            let mk = |s: &[f64], shape: &[usize]| Tensor::from_vec(shape, s.to_vec()).unwrap();
            let p = [
                mk(&vals[0..4], &[2, 2]), mk(&vals[4..8], &[2, 2]), mk(&vals[8..10], &[2]),
                mk(&vals[10..14], &[2, 2]), mk(&vals[14..18], &[2, 2]), mk(&vals[18..20], &[2]),
                mk(&vals[20..24], &[2, 2]), mk(&vals[24..28], &[2, 2]), mk(&vals[28..30], &[2]),
            ];
            let h_prev = &vals[36..38];
            let e = &vals[38..40];
            let out = gru_step(h_prev, e, &cell(&p)).unwrap();
            for i in 0..2 {
                proptest::prop_assert!(out.z[i] > 0.0 && out.z[i] < 1.0);
                proptest::prop_assert!(out.r[i] > 0.0 && out.r[i] < 1.0);
                let (lo, hi) = (h_prev[i].min(out.candidate[i]), h_prev[i].max(out.candidate[i]));
                proptest::prop_assert!(out.h[i] >= lo - 1e-12 && out.h[i] <= hi + 1e-12);
            }
        }
    }
}
