//! Word vectors (GloVe-style training, text I/O) and sentence vector providers.

mod glove;
mod sentence;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::textprep::{Vocabulary, PAD_TOKEN};

pub use glove::{build_cooccurrence, corpus_streams, train_word_vectors, CooccurrenceTable, GloveConfig, GloveRun};
pub use sentence::{sentence_key, write_sentence_vectors, SentenceVectorProvider};

/// One `d`-dimensional vector per vocabulary entry. The PAD row is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vocabulary, dim: usize, mut data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != vocab.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} rows of dim {dim} need {} values, got {}",
                vocab.len(),
                vocab.len() * dim,
                data.len()
            )));
        }
        if let Some(pad) = vocab.get(PAD_TOKEN) {
            data[pad * dim..(pad + 1) * dim].fill(0.0);
        }
        Ok(Self { vocab, dim, data })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.vocab.len()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(|i| self.row(i))
    }

    /// `T × d` matrix for `tokens`. Trailing PAD tokens are dropped and
    /// out-of-vocabulary tokens embed to zero.
    pub fn embed_tokens(&self, tokens: &[String]) -> Tensor {
        let end = tokens
            .iter()
            .rposition(|t| t != PAD_TOKEN)
            .map_or(0, |i| i + 1);
        let mut data = vec![0.0; end * self.dim];
        for (t, tok) in tokens[..end].iter().enumerate() {
            if let Some(v) = self.vector(tok) {
                data[t * self.dim..(t + 1) * self.dim].copy_from_slice(v);
            }
        }
        Tensor::from_vec(&[end, self.dim], data).expect("length matches shape")
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.vector(a)?, self.vector(b)?);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        Some(dot / (nx * ny).max(f64::MIN_POSITIVE))
    }

    /// `token v1 … vd` per line; the PAD row is not written.
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        for (i, tok) in self.vocab.tokens().iter().enumerate() {
            if tok == PAD_TOKEN {
                continue;
            }
            write!(out, "{tok}")?;
            for v in self.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the text format. The dimension comes from `expected_dim` or the
    /// first row; any row of a different width is a `DimMismatch`.
    pub fn read_text(input: impl BufRead, expected_dim: Option<usize>) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut data = Vec::new();
        let mut dim = expected_dim;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(tok) = parts.next() else { continue };
            let values = parts
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: n + 1,
                        message: format!("`{s}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let want = *dim.get_or_insert(values.len());
            if values.len() != want || want == 0 {
                return Err(Error::DimMismatch {
                    line: n + 1,
                    expected: want,
                    found: values.len(),
                });
            }
            tokens.push(tok.to_string());
            data.extend(values);
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            line: 0,
            message: "vector file is empty".into(),
        })?;
        let vocab = Vocabulary::from_tokens(tokens);
        let mut full = vec![0.0; dim];
        full.extend(data);
        Self::new(vocab, dim, full)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self> {
        Self::read_text(BufReader::new(File::open(path)?), expected_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EmbeddingMatrix {
        let vocab = Vocabulary::from_tokens(["sad".to_string(), "day".to_string()]);
        EmbeddingMatrix::new(vocab, 3, vec![9.0, 9.0, 9.0, 0.1, -0.2, 1.0 / 3.0, 2.5, 0.0, -1e-7])
            .unwrap()
    }

    #[test]
    fn pad_row_is_zero() {
        let m = small();
        assert_eq!(m.row(0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn text_round_trip() {
        let m = small();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = EmbeddingMatrix::read_text(buf.as_slice(), None).unwrap();
        assert_eq!(back.rows(), 3);
        for tok in ["sad", "day"] {
            let (a, b) = (m.vector(tok).unwrap(), back.vector(tok).unwrap());
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-6));
        }
    }

    #[test]
    fn short_row_is_dim_mismatch() {
        let text = "a 1 2 3\nb 1 2\n";
        assert!(matches!(
            EmbeddingMatrix::read_text(text.as_bytes(), None),
            Err(Error::DimMismatch { line: 2, expected: 3, found: 2 })
        ));
        assert!(matches!(
            EmbeddingMatrix::read_text("a 1 x\n".as_bytes(), None),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            EmbeddingMatrix::read_text("a 1 2\n".as_bytes(), Some(3)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn external_file_loads_all_rows() {
        let text: String = (0..20)
            .map(|i| {
                let vals: Vec<String> = (0..100).map(|j| format!("{}", (i * j) as f64 * 0.01)).collect();
                format!("w{i} {}\n", vals.join(" "))
            })
            .collect();
        let m = EmbeddingMatrix::read_text(text.as_bytes(), Some(100)).unwrap();
        assert_eq!(m.rows(), 21);
        assert_eq!(m.dim(), 100);
    }

    #[test]
    fn embed_tokens_handles_oov_and_trailing_pad() {
        let m = small();
        let toks: Vec<String> = ["sad", "unknown", "day", PAD_TOKEN, PAD_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let x = m.embed_tokens(&toks);
        assert_eq!(x.shape(), [3, 3]);
        assert_eq!(x.row(1), [0.0, 0.0, 0.0]);
        assert_eq!(x.row(2), m.vector("day").unwrap());
    }
}
