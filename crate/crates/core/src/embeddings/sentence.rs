use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

/// SHA-256 (hex) of the sentence's tokens joined by single spaces.
pub fn sentence_key(tokens: &[String]) -> String {
    hex::encode(Sha256::digest(tokens.join(" ").as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    key: String,
    vec: Vec<f64>,
}

/// Source of per-sentence vectors.
#[derive(Debug, Clone)]
pub enum SentenceVectorProvider {
    /// Precomputed vectors keyed by [`sentence_key`].
    FileBacked {
        dim: usize,
        vectors: HashMap<String, Vec<f64>>,
    },
    /// Average of the in-vocabulary word vectors; zero when none are known.
    MeanPool(Arc<EmbeddingMatrix>),
}

impl SentenceVectorProvider {
    pub fn mean_pool(embeddings: Arc<EmbeddingMatrix>) -> Self {
        Self::MeanPool(embeddings)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::FileBacked { dim, .. } => *dim,
            Self::MeanPool(e) => e.dim(),
        }
    }

    pub fn embed_sentence(&self, tokens: &[String]) -> Result<Vec<f64>> {
        match self {
            Self::FileBacked { vectors, .. } => {
                let key = sentence_key(tokens);
                vectors
                    .get(&key)
                    .cloned()
                    .ok_or_else(|| Error::MissingSentenceVector(tokens.join(" ")))
            }
            Self::MeanPool(e) => {
                let mut sum = vec![0.0; e.dim()];
                let mut n = 0usize;
                for v in tokens.iter().filter_map(|t| e.vector(t)) {
                    sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                    n += 1;
                }
                if n > 0 {
                    sum.iter_mut().for_each(|s| *s /= n as f64);
                }
                Ok(sum)
            }
        }
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SentenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            let want = *dim.get_or_insert(rec.vec.len());
            if rec.vec.len() != want {
                return Err(Error::DimMismatch {
                    line: n + 1,
                    expected: want,
                    found: rec.vec.len(),
                });
            }
            vectors.insert(rec.key, rec.vec);
        }
        Ok(Self::FileBacked {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    /// Writes a file-backed provider in key order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let Self::FileBacked { vectors, .. } = self else {
            return Err(Error::InvalidConfig("a mean-pool provider has no vector file".into()));
        };
        let mut keys: Vec<&String> = vectors.keys().collect();
        keys.sort();
        let mut w = BufWriter::new(File::create(path)?);
        for key in keys {
            let rec = SentenceRecord { key: key.clone(), vec: vectors[key].clone() };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `{"key", "vec"}` lines for the given sentences.
pub fn write_sentence_vectors<'a>(
    path: impl AsRef<Path>,
    entries: impl IntoIterator<Item = (&'a [String], Vec<f64>)>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (tokens, vec) in entries {
        serde_json::to_writer(
            &mut w,
            &SentenceRecord {
                key: sentence_key(tokens),
                vec,
            },
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
