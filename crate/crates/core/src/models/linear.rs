use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::f1_at_half;
use super::{binary_cross_entropy, EpochRecord, TrainConfig, TrainReport};
use crate::corpus::oversample_flags;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Parameter, Tensor};
use crate::textprep::BowVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    Logistic,
    Hinge,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Logistic => "logistic",
            LossMode::Hinge => "hinge",
        })
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossMode::Logistic),
            "hinge" => Ok(LossMode::Hinge),
            _ => Err(Error::InvalidConfig(format!("unknown loss mode `{s}`"))),
        }
    }
}

/// Linear model over bag-of-words counts. The weights are stored as
/// `scale · raw` so that the L2 shrinkage of a step costs O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBow {
    pub mode: LossMode,
    raw: Vec<f64>,
    scale: f64,
    bias: f64,
}

impl LinearBow {
    pub fn new(mode: LossMode, vocab_size: usize) -> Self {
        Self {
            mode,
            raw: vec![0.0; vocab_size],
            scale: 1.0,
            bias: 0.0,
        }
    }

    pub fn from_weights(mode: LossMode, weights: Vec<f64>, bias: f64) -> Self {
        Self {
            mode,
            raw: weights,
            scale: 1.0,
            bias,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.raw.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.raw.iter().map(|w| w * self.scale).collect()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Raw decision value `w · x + b`.
    pub fn score(&self, x: &BowVector) -> f64 {
        let dot: f64 = x
            .iter()
            .filter(|(i, _)| **i < self.raw.len())
            .map(|(&i, &c)| self.raw[i] * c as f64)
            .sum();
        dot * self.scale + self.bias
    }

    /// `σ(score)`, so that 0.5 is the decision boundary in both modes.
    pub fn probability(&self, x: &BowVector) -> f64 {
        sigmoid(self.score(x))
    }

    pub fn loss(&self, x: &BowVector, y: bool) -> f64 {
        let s = self.score(x);
        match self.mode {
            LossMode::Logistic => binary_cross_entropy(s, y),
            LossMode::Hinge => (1.0 - sign(y) * s).max(0.0),
        }
    }

    /// One stochastic subgradient step on `loss + λ/2 ‖w‖²`; returns the
    /// data loss before the step.
    pub fn sgd_step(&mut self, x: &BowVector, y: bool, eta: f64, lambda: f64) -> f64 {
        let s = self.score(x);
        let (loss, g) = match self.mode {
            LossMode::Logistic => (binary_cross_entropy(s, y), sigmoid(s) - if y { 1.0 } else { 0.0 }),
            LossMode::Hinge => {
                let margin = sign(y) * s;
                if margin < 1.0 {
                    (1.0 - margin, -sign(y))
                } else {
                    (0.0, 0.0)
                }
            }
        };
        self.scale *= 1.0 - eta * lambda;
        if self.scale < 1e-9 {
            self.raw.iter_mut().for_each(|w| *w *= self.scale);
            self.scale = 1.0;
        }
        if g != 0.0 {
            let v = self.raw.len();
            for (&i, &c) in x.iter().filter(|(i, _)| **i < v) {
                self.raw[i] -= eta * g * c as f64 / self.scale;
            }
            self.bias -= eta * g;
        }
        loss
    }

    /// The same model with the scale folded into the weights, so that it
    /// scores identically after a round trip through [`Self::to_params`].
    fn folded(&self) -> Self {
        Self::from_weights(self.mode, self.weights(), self.bias)
    }

    pub fn to_params(&self) -> Vec<Parameter> {
        vec![
            Parameter::new("linear.w", Tensor::vector(self.weights()), true),
            Parameter::new("linear.b", Tensor::vector(vec![self.bias]), false),
        ]
    }

    pub fn from_tensors(mode: LossMode, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let find = |name: &str| {
            tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.data().to_vec())
                .ok_or_else(|| Error::ShapeMismatch(format!("checkpoint lacks `{name}`")))
        };
        let bias = find("linear.b")?;
        if bias.len() != 1 {
            return Err(Error::ShapeMismatch("linear bias must be a scalar".into()));
        }
        Ok(Self::from_weights(mode, find("linear.w")?, bias[0]))
    }
}

fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

/// Seeded SGD over the oversampled stream with early stopping on
/// validation F1.
#[allow(clippy::too_many_arguments)]
pub fn train_linear_bow(
    mode: LossMode,
    label: &str,
    vocab_size: usize,
    train: &[&BowVector],
    train_flags: &[bool],
    val: &[&BowVector],
    val_flags: &[bool],
    cfg: &TrainConfig,
) -> Result<(LinearBow, TrainReport)> {
    cfg.validate()?;
    if val.is_empty() || val.len() != val_flags.len() || train.len() != train_flags.len() {
        return Err(Error::InvalidConfig(
            "training needs a nonempty validation split and one flag per input".into(),
        ));
    }
    let stream = oversample_flags(train_flags, cfg.ratio, cfg.seed, label)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51_7cc1_b727_220a);
    let mut model = LinearBow::new(mode, vocab_size);
    let mut order = stream.clone();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, LinearBow)> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        if epoch > 1 {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for &i in &order {
            total += model.sgd_step(train[i], train_flags[i], cfg.linear_lr, cfg.l2);
        }
        let scores: Vec<f64> = val.iter().map(|x| model.probability(x)).collect();
        let val_f1 = f1_at_half(&scores, val_flags);
        history.push(EpochRecord {
            epoch,
            loss: total / order.len() as f64,
            val_f1,
            lr: cfg.linear_lr,
        });
        if best.as_ref().is_none_or(|(_, f, _)| val_f1 > *f) {
            best = Some((epoch, val_f1, model.folded()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_f1, model) = best.expect("at least one epoch runs");
    Ok((
        model,
        TrainReport {
            label: label.to_string(),
            history,
            best_epoch,
            best_val_f1,
            stream_len: stream.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bow(pairs: &[(usize, u32)]) -> BowVector {
        pairs.iter().copied().collect()
    }

    #[test]
    fn hinge_flat_region_only_shrinks() {
        let mut m = LinearBow::from_weights(LossMode::Hinge, vec![2.0, -1.0, 0.5], 0.25);
        let x = bow(&[(0, 1)]);
        assert!(m.score(&x) > 1.0);
        let loss = m.sgd_step(&x, true, 0.1, 0.5);
        assert_eq!(loss, 0.0);
        let w = m.weights();
        let expect = [2.0 * 0.95, -0.95, 0.5 * 0.95];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(m.bias(), 0.25);
    }

    #[test]
    fn trained_model_survives_a_param_round_trip_bit_exactly() {
        let xs: Vec<BowVector> = (0..30).map(|i| bow(&[(i % 4, 1 + (i % 3) as u32), (4, 2)])).collect();
        let flags: Vec<bool> = (0..30).map(|i| i % 4 == 1).collect();
        let refs: Vec<&BowVector> = xs.iter().collect();
        let cfg = TrainConfig { max_epochs: 4, l2: 0.01, ..Default::default() };
        for mode in [LossMode::Logistic, LossMode::Hinge] {
            let (m, _) = train_linear_bow(mode, "x", 5, &refs, &flags, &refs, &flags, &cfg).unwrap();
            let tensors = m.to_params().into_iter().map(|p| (p.name, p.value)).collect();
            let back = LinearBow::from_tensors(mode, tensors).unwrap();
            for x in &xs {
                assert_eq!(m.score(x).to_bits(), back.score(x).to_bits());
            }
        }
    }

    #[test]
    fn separable_toy_set_is_fit() {
        let xs: Vec<BowVector> = (0..40)
            .map(|i| if i % 2 == 0 { bow(&[(0, 1), (2, (i % 3) as u32)]) } else { bow(&[(1, 1), (2, (i % 3) as u32)]) })
            .collect();
        let flags: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let refs: Vec<&BowVector> = xs.iter().collect();
        for mode in [LossMode::Logistic, LossMode::Hinge] {
            let cfg = TrainConfig { max_epochs: 30, linear_lr: 0.1, ..Default::default() };
            let (model, _) = train_linear_bow(mode, "toy", 3, &refs, &flags, &refs, &flags, &cfg).unwrap();
            let correct = xs
                .iter()
                .zip(&flags)
                .filter(|(x, &y)| (model.probability(x) >= 0.5) == y)
                .count();
            assert_eq!(correct, 40, "{mode}");
        }
    }

    #[test]
    fn lazy_scale_matches_dense_update() {
        let mut m = LinearBow::from_weights(LossMode::Logistic, vec![0.3, -0.2], 0.1);
        let x = bow(&[(1, 2)]);
        let s = m.score(&x);
        let g = sigmoid(s) - 0.0;
        let (eta, lambda) = (0.05, 0.1);
        let expect = [0.3 * (1.0 - eta * lambda), -0.2 * (1.0 - eta * lambda) - eta * g * 2.0];
        m.sgd_step(&x, false, eta, lambda);
        for (a, b) in m.weights().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_positives_propagates() {
        let x = bow(&[(0, 1)]);
        let refs = vec![&x, &x];
        let err = train_linear_bow(LossMode::Hinge, "guilt", 1, &refs, &[false, false], &refs, &[false, false], &TrainConfig::default());
        assert!(matches!(err, Err(Error::NoPositives(l)) if l == "guilt"));
    }
}
