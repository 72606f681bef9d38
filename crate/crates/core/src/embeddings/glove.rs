use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::corpus::Dataset;
use crate::textprep::{tokenize, Vocabulary};

/// Sparse symmetric co-occurrence counts weighted by inverse distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTable {
    /// `(row, col, weight)` sorted by `(row, col)`.
    entries: Vec<(usize, usize, f64)>,
    pub window: usize,
    pub vocab_size: usize,
}

impl CooccurrenceTable {
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map_or(0.0, |k| self.entries[k].2)
    }
}

/// Token streams of a dataset: the problem and the negative take of each
/// post, in dataset order.
pub fn corpus_streams(dataset: &Dataset) -> Vec<Vec<String>> {
    dataset
        .posts
        .iter()
        .flat_map(|p| [tokenize(&p.problem), tokenize(&p.negative_take)])
        .collect()
}

/// Every ordered pair of in-vocabulary tokens at distance `1..=window`
/// within a stream adds `1 / distance` to both `(a, b)` and `(b, a)`.
/// Out-of-vocabulary tokens are removed before windowing.
pub fn build_cooccurrence<S: AsRef<str>>(
    streams: impl IntoIterator<Item = Vec<S>>,
    vocab: &Vocabulary,
    window: usize,
) -> CooccurrenceTable {
    let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
    for stream in streams {
        let ids: Vec<usize> = stream
            .iter()
            .filter_map(|t| vocab.get(t.as_ref()).filter(|&i| i != 0))
            .collect();
        for (pos, &a) in ids.iter().enumerate() {
            for (dist, &b) in ids[pos + 1..].iter().take(window).enumerate() {
                let w = 1.0 / (dist + 1) as f64;
                *counts.entry((a, b)).or_default() += w;
                *counts.entry((b, a)).or_default() += w;
            }
        }
    }
    let mut entries: Vec<(usize, usize, f64)> =
        counts.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    entries.sort_by_key(|e| (e.0, e.1));
    CooccurrenceTable {
        entries,
        window,
        vocab_size: vocab.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GloveConfig {
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 50,
            seed: 0,
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GloveRun {
    pub embeddings: EmbeddingMatrix,
    /// Objective at initialization followed by the value after each epoch.
    pub objective: Vec<f64>,
}

struct GloveModel {
    dim: usize,
    w: Vec<f64>,
    wc: Vec<f64>,
    b: Vec<f64>,
    bc: Vec<f64>,
}

impl GloveModel {
    fn residual(&self, i: usize, j: usize, x: f64) -> f64 {
        let d = self.dim;
        let dot: f64 = self.w[i * d..(i + 1) * d]
            .iter()
            .zip(&self.wc[j * d..(j + 1) * d])
            .map(|(a, b)| a * b)
            .sum();
        dot + self.b[i] + self.bc[j] - x.ln()
    }
}

fn weight(x: f64, cfg: &GloveConfig) -> f64 {
    if x < cfg.x_max {
        (x / cfg.x_max).powf(cfg.alpha)
    } else {
        1.0
    }
}

fn objective(model: &GloveModel, table: &CooccurrenceTable, cfg: &GloveConfig) -> f64 {
    table
        .entries
        .iter()
        .map(|&(i, j, x)| weight(x, cfg) * model.residual(i, j, x).powi(2))
        .sum()
}

/// Weighted least squares on log co-occurrences, optimized with per-pair
/// AdaGrad updates over one fixed shuffled order. Returns word plus context
/// vectors.
pub fn train_word_vectors(
    table: &CooccurrenceTable,
    vocab: &Vocabulary,
    cfg: &GloveConfig,
) -> Result<GloveRun> {
    if table.is_empty() {
        return Err(Error::InvalidConfig("co-occurrence table is empty".into()));
    }
    if cfg.dim == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
    }
    let (v, d) = (vocab.len(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = |n: usize| -> Vec<f64> {
        (0..n).map(|_| (rng.random::<f64>() - 0.5) / d as f64).collect()
    };
    let mut model = GloveModel {
        dim: d,
        w: init(v * d),
        wc: init(v * d),
        b: vec![0.0; v],
        bc: vec![0.0; v],
    };
    let mut gsq_w = vec![1.0f64; v * d];
    let mut gsq_wc = vec![1.0f64; v * d];
    let mut gsq_b = vec![1.0f64; v];
    let mut gsq_bc = vec![1.0f64; v];

    let mut order: Vec<usize> = (0..table.len()).collect();
    order.shuffle(&mut rng);

    let mut history = vec![objective(&model, table, cfg)];
    let lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        for &k in &order {
            let (i, j, x) = table.entries[k];
            let diff = weight(x, cfg) * model.residual(i, j, x);
            let (wi, wj) = (i * d, j * d);
            for c in 0..d {
                let gw = diff * model.wc[wj + c];
                let gc = diff * model.w[wi + c];
                model.w[wi + c] -= lr * gw / gsq_w[wi + c].sqrt();
                model.wc[wj + c] -= lr * gc / gsq_wc[wj + c].sqrt();
                gsq_w[wi + c] += gw * gw;
                gsq_wc[wj + c] += gc * gc;
            }
            model.b[i] -= lr * diff / gsq_b[i].sqrt();
            model.bc[j] -= lr * diff / gsq_bc[j].sqrt();
            gsq_b[i] += diff * diff;
            gsq_bc[j] += diff * diff;
        }
        history.push(objective(&model, table, cfg));
    }

    let data: Vec<f64> = model.w.iter().zip(&model.wc).map(|(a, b)| a + b).collect();
    Ok(GloveRun {
        embeddings: EmbeddingMatrix::new(vocab.clone(), d, data)?,
        objective: history,
    })
}
