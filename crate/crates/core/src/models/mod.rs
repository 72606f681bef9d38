//! The gated CNN, the GRU over sentence vectors, linear bag-of-words models,
//! the chance and majority baselines, per-label training and prediction.

mod baseline;
mod bundle;
mod cnn;
mod fit;
mod gru;
mod head;
mod linear;
mod train;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::OversampleSpec;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, HasParams, LrSchedule, Parameter, Tensor};
use crate::ontology::LabelSet;

pub use baseline::{ChanceBaseline, MajorityBaseline};
pub use bundle::{BundleManifest, Features, LabelEntry, ModelBundle, Prediction, TrainedModel};
pub use cnn::{CnnInput, GatedCnn};
pub use fit::fit_bundle;
pub use gru::{GruClassifier, GruInput};
pub use linear::{train_linear_bow, LinearBow, LossMode};
pub use train::{predict_all, train_binary, EpochRecord, TrainReport};

/// Width of the pooled feature vector, the GRU state and the hidden layer.
pub const HIDDEN: usize = 150;
pub const CONV_WIDTHS: [usize; 3] = [2, 3, 4];
pub const CONV_MAPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Gru,
    Lr,
    Svm,
    Chance,
    Majority,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Cnn,
        ModelKind::Gru,
        ModelKind::Lr,
        ModelKind::Svm,
        ModelKind::Chance,
        ModelKind::Majority,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Gru => "gru",
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
            ModelKind::Chance => "chance",
            ModelKind::Majority => "majority",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Cnn | ModelKind::Gru)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model kind `{s}`")))
    }
}

/// Hyperparameters of per-label binary training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-F1 improvement before stopping.
    pub patience: usize,
    pub ratio: OversampleSpec,
    pub lr: LrSchedule,
    pub keep_prob: f64,
    pub l2: f64,
    pub clip_norm: f64,
    pub seed: u64,
    /// One filter bank for both text fields instead of one per field.
    pub shared_filters: bool,
    /// Standard deviation of the truncated-normal weight initializer.
    pub init_std: f64,
    /// Step size of the linear bag-of-words models.
    pub linear_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 24,
            max_epochs: 50,
            patience: 10,
            ratio: OversampleSpec::default(),
            lr: LrSchedule::default(),
            keep_prob: 0.8,
            l2: 1e-4,
            clip_norm: 5.0,
            seed: 0,
            shared_filters: true,
            init_std: 0.01,
            linear_lr: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad("keep_prob must lie in (0, 1]");
        }
        if self.l2 < 0.0 || self.clip_norm <= 0.0 || self.init_std <= 0.0 {
            return bad("l2 must be non-negative, clip_norm and init_std positive");
        }
        if self.lr.initial <= 0.0 || self.lr.decay <= 0.0 || self.linear_lr <= 0.0 {
            return bad("learning rates must be positive");
        }
        if self.ratio.pos_units == 0 || self.ratio.neg_units == 0 {
            return bad("ratio units must be positive");
        }
        Ok(())
    }
}

/// A per-label binary classifier trained by mini-batch gradient descent.
pub trait BinaryModel: HasParams {
    type Input;

    /// Mean binary cross-entropy of the batch. Gradients are accumulated
    /// into the parameters. Dropout is applied only when `rng` is given.
    fn loss_and_grad(
        &mut self,
        batch: &[&Self::Input],
        targets: &[bool],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64>;

    /// Positive-class probabilities with dropout off.
    fn predict_batch(&self, batch: &[&Self::Input]) -> Result<Vec<f64>>;
}

/// `g = σ(p W_p + n W_n + b)`, `h = g ⊙ p + (1 − g) ⊙ n` for one pair of
/// feature vectors. `W_p` and `W_n` are `k × k`.
pub fn gate_combine(p: &[f64], n: &[f64], wp: &[f64], wn: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let k = p.len();
    if n.len() != k || b.len() != k || wp.len() != k * k || wn.len() != k * k {
        return Err(Error::ShapeMismatch(format!(
            "gate over {k} features got n {}, W_p {}, W_n {}, b {}",
            n.len(),
            wp.len(),
            wn.len(),
            b.len()
        )));
    }
    Ok((0..k)
        .map(|j| {
            let a: f64 = b[j]
                + (0..k).map(|i| p[i] * wp[i * k + j] + n[i] * wn[i * k + j]).sum::<f64>();
            let g = sigmoid(a);
            g * p[j] + (1.0 - g) * n[j]
        })
        .collect())
}

/// Labels whose score reaches `threshold`.
pub fn decide<'a>(scores: impl IntoIterator<Item = (&'a str, f64)>, threshold: f64) -> LabelSet {
    scores
        .into_iter()
        .filter(|(_, s)| *s >= threshold)
        .map(|(l, _)| l.to_string())
        .collect()
}

/// Overwrites parameter values with the equally named tensors. Every
/// parameter must be present with its exact shape.
pub(crate) fn assign_tensors(params: &mut [Parameter], tensors: Vec<(String, Tensor)>) -> Result<()> {
    let mut by_name: std::collections::HashMap<String, Tensor> = tensors.into_iter().collect();
    for p in params.iter_mut() {
        let t = by_name
            .remove(&p.name)
            .ok_or_else(|| Error::ShapeMismatch(format!("checkpoint lacks `{}`", p.name)))?;
        if t.shape() != p.value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "`{}` is {:?} in the checkpoint, model expects {:?}",
                p.name,
                t.shape(),
                p.value.shape()
            )));
        }
        p.value = t;
        p.zero_grad();
    }
    if let Some(extra) = by_name.keys().min() {
        return Err(Error::ShapeMismatch(format!("unexpected tensor `{extra}` in checkpoint")));
    }
    Ok(())
}

pub(crate) fn binary_cross_entropy(logit: f64, target: bool) -> f64 {
    let y = if target { 1.0 } else { 0.0 };
    crate::numerics::softplus(logit) - y * logit
}
