use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    decide, BinaryModel, ChanceBaseline, CnnInput, GatedCnn, GruClassifier, GruInput, LinearBow,
    LossMode, MajorityBaseline, ModelKind, TrainConfig, TrainReport,
};
use crate::corpus::Post;
use crate::embeddings::{EmbeddingMatrix, SentenceVectorProvider};
use crate::error::{Error, Result};
use crate::numerics::{load_checkpoint, save_checkpoint, HasParams};
use crate::ontology::{LabelCatalog, LabelSet};
use crate::textprep::{bow_featurize, Vocabulary};

/// A trained per-label predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Cnn(GatedCnn),
    Gru(GruClassifier),
    Linear(LinearBow),
    Chance(ChanceBaseline),
    Majority(MajorityBaseline),
}

/// What a bundle needs to turn a post into model input.
#[derive(Debug, Clone)]
pub enum Features {
    Words(Arc<EmbeddingMatrix>),
    Sentences(SentenceVectorProvider),
    Bow(Vocabulary),
    Nothing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label: String,
    pub checkpoint: Option<String>,
    pub best_epoch: Option<usize>,
    pub best_val_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub kind: ModelKind,
    pub config: TrainConfig,
    /// Input width: embedding dim, sentence-vector dim or vocabulary size.
    pub input_dim: usize,
    /// One of `words`, `mean_pool`, `sentence_file`, `bow`, `none`.
    pub features: String,
    pub feature_file: Option<String>,
    pub labels: Vec<LabelEntry>,
}

/// Scores and decisions for one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub post_id: String,
    pub labels: LabelSet,
    pub scores: BTreeMap<String, f64>,
    /// Catalog labels without a trained model.
    pub missing: Vec<String>,
}

/// Directory of per-label models sharing one featurizer.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub kind: ModelKind,
    pub config: TrainConfig,
    pub features: Features,
    models: BTreeMap<String, TrainedModel>,
    entries: BTreeMap<String, LabelEntry>,
}

const FORMAT: &str = "cbtnlu-bundle-1";
const MANIFEST: &str = "manifest.json";

impl ModelBundle {
    pub fn new(kind: ModelKind, config: TrainConfig, features: Features) -> Self {
        Self {
            kind,
            config,
            features,
            models: BTreeMap::new(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, label: &str, model: TrainedModel, report: Option<&TrainReport>) {
        self.entries.insert(
            label.to_string(),
            LabelEntry {
                label: label.to_string(),
                checkpoint: None,
                best_epoch: report.map(|r| r.best_epoch),
                best_val_f1: report.map(|r| r.best_val_f1),
            },
        );
        self.models.insert(label.to_string(), model);
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn model(&self, label: &str) -> Option<&TrainedModel> {
        self.models.get(label)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    fn input_dim(&self) -> usize {
        match &self.features {
            Features::Words(e) => e.dim(),
            Features::Sentences(p) => p.dim(),
            Features::Bow(v) => v.len(),
            Features::Nothing => 0,
        }
    }

    /// Scores every label model on `post`.
    pub fn score_post(&self, post: &Post) -> Result<BTreeMap<String, f64>> {
        enum Input {
            Cnn(CnnInput),
            Gru(GruInput),
            Bow(crate::textprep::BowVector),
            Id,
        }
        let input = match (&self.features, self.kind) {
            (Features::Words(e), ModelKind::Cnn) => Input::Cnn(CnnInput::from_post(post, e)?),
            (Features::Sentences(p), ModelKind::Gru) => Input::Gru(GruInput::from_post(post, p)?),
            (Features::Bow(v), ModelKind::Lr | ModelKind::Svm) => Input::Bow(bow_featurize(post, v)),
            (_, ModelKind::Chance | ModelKind::Majority) => Input::Id,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "bundle features do not fit model kind {}",
                    self.kind
                )))
            }
        };
        self.models
            .iter()
            .map(|(label, model)| {
                let score = match (model, &input) {
                    (TrainedModel::Cnn(m), Input::Cnn(x)) => m.predict_batch(&[x])?[0],
                    (TrainedModel::Gru(m), Input::Gru(x)) => m.predict_batch(&[x])?[0],
                    (TrainedModel::Linear(m), Input::Bow(x)) => m.probability(x),
                    (TrainedModel::Chance(m), _) => m.score(&post.id),
                    (TrainedModel::Majority(m), _) => m.score(&post.id),
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "model for `{label}` does not match bundle kind {}",
                            self.kind
                        )))
                    }
                };
                Ok((label.clone(), score))
            })
            .collect()
    }

    /// Labels scoring at least `threshold`. Catalog labels without a model
    /// are listed in `missing` and skipped.
    pub fn predict(&self, post: &Post, catalog: &LabelCatalog, threshold: f64) -> Result<Prediction> {
        let scores = self.score_post(post)?;
        let labels = decide(scores.iter().map(|(l, s)| (l.as_str(), *s)), threshold);
        let missing = catalog
            .ids()
            .filter(|id| !scores.contains_key(*id))
            .map(str::to_string)
            .collect();
        Ok(Prediction {
            post_id: post.id.clone(),
            labels,
            scores,
            missing,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<BundleManifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (features, feature_file) = match &self.features {
            Features::Words(e) => {
                e.save(dir.join("vectors.txt"))?;
                ("words", Some("vectors.txt"))
            }
            Features::Sentences(SentenceVectorProvider::MeanPool(e)) => {
                e.save(dir.join("vectors.txt"))?;
                ("mean_pool", Some("vectors.txt"))
            }
            Features::Sentences(p @ SentenceVectorProvider::FileBacked { .. }) => {
                p.save(dir.join("sentences.jsonl"))?;
                ("sentence_file", Some("sentences.jsonl"))
            }
            Features::Bow(v) => {
                let mut w = BufWriter::new(File::create(dir.join("vocab.tsv"))?);
                v.write_tsv(&mut w)?;
                w.flush()?;
                ("bow", Some("vocab.tsv"))
            }
            Features::Nothing => ("none", None),
        };
        let mut labels = Vec::new();
        for (label, model) in &self.models {
            let mut entry = self.entries[label].clone();
            let file = format!("{label}.ckpt");
            let written = match model {
                TrainedModel::Cnn(m) => Some(save_checkpoint(dir.join(&file), m.params())?),
                TrainedModel::Gru(m) => Some(save_checkpoint(dir.join(&file), m.params())?),
                TrainedModel::Linear(m) => Some(save_checkpoint(dir.join(&file), &m.to_params())?),
                TrainedModel::Chance(_) | TrainedModel::Majority(_) => None,
            };
            entry.checkpoint = written.map(|_| file);
            labels.push(entry);
        }
        let manifest = BundleManifest {
            format: FORMAT.to_string(),
            kind: self.kind,
            config: self.config.clone(),
            input_dim: self.input_dim(),
            features: features.to_string(),
            feature_file: feature_file.map(str::to_string),
            labels,
        };
        let mut w = BufWriter::new(File::create(dir.join(MANIFEST))?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(manifest)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: BundleManifest =
            serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST))?))?;
        if manifest.format != FORMAT {
            return Err(Error::InvalidConfig(format!("unsupported bundle format `{}`", manifest.format)));
        }
        let file = || {
            manifest
                .feature_file
                .as_ref()
                .map(|f| dir.join(f))
                .ok_or_else(|| Error::InvalidConfig("bundle manifest names no feature file".into()))
        };
        let features = match manifest.features.as_str() {
            "words" => Features::Words(Arc::new(EmbeddingMatrix::load(file()?, Some(manifest.input_dim))?)),
            "mean_pool" => Features::Sentences(SentenceVectorProvider::mean_pool(Arc::new(
                EmbeddingMatrix::load(file()?, Some(manifest.input_dim))?,
            ))),
            "sentence_file" => Features::Sentences(SentenceVectorProvider::load(file()?)?),
            "bow" => Features::Bow(Vocabulary::read_tsv(BufReader::new(File::open(file()?)?))?),
            "none" => Features::Nothing,
            other => return Err(Error::InvalidConfig(format!("unknown feature kind `{other}`"))),
        };
        let mut bundle = Self::new(manifest.kind, manifest.config.clone(), features);
        let (kind, cfg, dim) = (manifest.kind, &manifest.config, manifest.input_dim);
        for entry in manifest.labels {
            let tensors = match &entry.checkpoint {
                Some(f) => Some(load_checkpoint(dir.join(f))?),
                None => None,
            };
            let need = || {
                tensors
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig(format!("no checkpoint for `{}`", entry.label)))
            };
            let model = match kind {
                ModelKind::Cnn => TrainedModel::Cnn(GatedCnn::from_tensors(dim, cfg, need()?)?),
                ModelKind::Gru => TrainedModel::Gru(GruClassifier::from_tensors(dim, cfg, need()?)?),
                ModelKind::Lr => TrainedModel::Linear(LinearBow::from_tensors(LossMode::Logistic, need()?)?),
                ModelKind::Svm => TrainedModel::Linear(LinearBow::from_tensors(LossMode::Hinge, need()?)?),
                ModelKind::Chance => TrainedModel::Chance(ChanceBaseline::new(&entry.label, cfg.seed)),
                ModelKind::Majority => TrainedModel::Majority(MajorityBaseline),
            };
            bundle.models.insert(entry.label.clone(), model);
            bundle.entries.insert(entry.label.clone(), entry);
        }
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn embeddings() -> Arc<EmbeddingMatrix> {
        let vocab = Vocabulary::from_tokens(["i", "failed", "my", "exam", "."].map(String::from));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = (0..6 * 4).map(|_| rng.random_range(-1.0..1.0) / 3.0).collect();
        Arc::new(EmbeddingMatrix::new(vocab, 4, data).unwrap())
    }

    #[test]
    fn cnn_bundle_round_trip_is_bit_exact() {
        let cfg = TrainConfig { init_std: 0.3, ..Default::default() };
        let emb = embeddings();
        let mut bundle = ModelBundle::new(ModelKind::Cnn, cfg.clone(), Features::Words(emb.clone()));
        bundle.insert("anxiety", TrainedModel::Cnn(GatedCnn::new(4, &cfg)), None);
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        let back = ModelBundle::load(dir.path()).unwrap();
        let post = Post::new("p1", "I failed my exam.", "I failed.");
        assert_eq!(bundle.score_post(&post).unwrap(), back.score_post(&post).unwrap());
        let catalog = LabelCatalog::load();
        let pred = back.predict(&post, &catalog, 0.5).unwrap();
        assert_eq!(pred.missing.len(), catalog.len() - 1);
    }

    #[test]
    fn gru_and_linear_round_trip() {
        let cfg = TrainConfig { init_std: 0.3, ..Default::default() };
        let provider = SentenceVectorProvider::mean_pool(embeddings());
        let mut bundle = ModelBundle::new(ModelKind::Gru, cfg.clone(), Features::Sentences(provider));
        bundle.insert("hurt", TrainedModel::Gru(GruClassifier::new(4, &cfg)), None);
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        let post = Post::new("p", "I failed. My exam.", "");
        let back = ModelBundle::load(dir.path()).unwrap();
        assert_eq!(bundle.score_post(&post).unwrap(), back.score_post(&post).unwrap());

        let vocab = embeddings().vocab().clone();
        let mut bundle = ModelBundle::new(ModelKind::Svm, cfg, Features::Bow(vocab.clone()));
        let w = LinearBow::from_weights(LossMode::Hinge, (0..vocab.len()).map(|i| i as f64 * 0.1 - 0.2).collect(), 0.05);
        bundle.insert("work", TrainedModel::Linear(w), None);
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        let back = ModelBundle::load(dir.path()).unwrap();
        assert_eq!(bundle.score_post(&post).unwrap(), back.score_post(&post).unwrap());
    }

    #[test]
    fn wrong_tensor_shape_rejected() {
        let cfg = TrainConfig::default();
        let bad = vec![("gate.b".to_string(), Tensor::zeros(&[3]))];
        assert!(GatedCnn::from_tensors(4, &cfg, bad).is_err());
    }
}
