use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BinaryModel, TrainConfig};
use crate::corpus::oversample_flags;
use crate::error::{Error, Result};
use crate::evaluation::ConfusionCounts;
use crate::numerics::{apply_l2, clip_global_norm, AdamState, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective (cross-entropy plus L2 penalty) per batch.
    pub loss: f64,
    pub val_f1: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub label: String,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    /// Length of the oversampled training stream.
    pub stream_len: usize,
}

const EVAL_CHUNK: usize = 128;

/// Probabilities for many inputs, evaluated in fixed-size chunks.
pub fn predict_all<M: BinaryModel>(model: &M, inputs: &[&M::Input]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(EVAL_CHUNK) {
        out.extend(model.predict_batch(chunk)?);
    }
    Ok(out)
}

pub(crate) fn f1_at_half(scores: &[f64], gold: &[bool]) -> f64 {
    let pred: Vec<bool> = scores.iter().map(|s| *s >= 0.5).collect();
    ConfusionCounts::from_flags(&pred, gold).metrics().f1
}

/// Trains one per-label model on an oversampled stream with Adam, keeping
/// the parameters of the epoch with the best validation F1.
pub fn train_binary<M: BinaryModel>(
    model: &mut M,
    label: &str,
    train: &[&M::Input],
    train_flags: &[bool],
    val: &[&M::Input],
    val_flags: &[bool],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if val.is_empty() || val.len() != val_flags.len() || train.len() != train_flags.len() {
        return Err(Error::InvalidConfig(
            "training needs a nonempty validation split and one flag per input".into(),
        ));
    }
    let stream = oversample_flags(train_flags, cfg.ratio, cfg.seed, label)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::new(model.params());
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;
    let mut stale = 0;
    let mut order = stream.clone();

    for epoch in 1..=cfg.max_epochs {
        if epoch > 1 {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        let mut batches = 0usize;
        let mut lr = cfg.lr.lr_at(adam.step);
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&M::Input> = chunk.iter().map(|&i| train[i]).collect();
            let targets: Vec<bool> = chunk.iter().map(|&i| train_flags[i]).collect();
            let loss = model.loss_and_grad(&inputs, &targets, Some(&mut rng))?;
            let penalty = apply_l2(model.params_mut(), cfg.l2);
            if !(loss + penalty).is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "label `{label}`, epoch {epoch}, step {}: loss {loss}, penalty {penalty}",
                    adam.step
                )));
            }
            clip_global_norm(model.params_mut(), cfg.clip_norm);
            lr = cfg.lr.lr_at(adam.step);
            adam.update(model.params_mut(), lr)?;
            total += loss + penalty;
            batches += 1;
        }
        let val_f1 = f1_at_half(&predict_all(model, val)?, val_flags);
        history.push(EpochRecord {
            epoch,
            loss: total / batches.max(1) as f64,
            val_f1,
            lr,
        });
        log::debug!("{label} epoch {epoch}: loss {:.5} val_f1 {val_f1:.4}", total / batches.max(1) as f64);
        if best.as_ref().is_none_or(|(_, f, _)| val_f1 > *f) {
            let snapshot = model.params().iter().map(|p| p.value.clone()).collect();
            best = Some((epoch, val_f1, snapshot));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_val_f1, snapshot) = best.expect("at least one epoch runs");
    for (p, v) in model.params_mut().iter_mut().zip(snapshot) {
        p.value = v;
        p.zero_grad();
    }
    Ok(TrainReport {
        label: label.to_string(),
        history,
        best_epoch,
        best_val_f1,
        stream_len: stream.len(),
    })
}
