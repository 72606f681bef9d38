//! Posts, gold labels, ingestion, fold planning, oversampling and the
//! synthetic corpus generator.

mod folds;
mod oversample;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{LabelCatalog, LabelSet};

pub use folds::{split_folds, Fold, FoldPlan};
pub use oversample::{oversample, oversample_flags, OversampleSpec};
pub use synth::{keywords_for, synth_generate, FILLER_WORDS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub problem: String,
    pub negative_take: String,
}

impl Post {
    pub fn new(id: &str, problem: &str, negative_take: &str) -> Self {
        Self {
            id: id.to_string(),
            problem: problem.to_string(),
            negative_take: negative_take.to_string(),
        }
    }
}

/// One annotator's label set for one post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub post_id: String,
    pub annotator_id: String,
    pub labels: LabelSet,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub posts: Vec<Post>,
    /// Gold labels; posts without an entry are unlabelled.
    pub gold: BTreeMap<String, LabelSet>,
}

/// One line of a corpus file.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    problem: String,
    negative_take: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.posts.iter().map(|p| p.id.clone()).collect()
    }

    pub fn post(&self, id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.id == id)
    }

    /// The subset of posts that carry gold labels, in the original order.
    pub fn labelled(&self) -> Dataset {
        Dataset {
            posts: self
                .posts
                .iter()
                .filter(|p| self.gold.contains_key(&p.id))
                .cloned()
                .collect(),
            gold: self.gold.clone(),
        }
    }

    /// Whether the post at each position carries `label`.
    pub fn label_flags(&self, label: &str) -> Vec<bool> {
        self.posts
            .iter()
            .map(|p| self.gold.get(&p.id).is_some_and(|s| s.contains(label)))
            .collect()
    }

    /// Checks the cross-field invariants: unique ids, non-empty problems,
    /// gold keys referencing posts, gold labels in the catalog.
    pub fn validate(&self, catalog: &LabelCatalog) -> Result<()> {
        let mut seen = HashSet::new();
        for p in &self.posts {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        for (id, labels) in &self.gold {
            if !seen.contains(id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "gold labels reference unknown post `{id}`"
                )));
            }
            catalog.check(labels)?;
        }
        Ok(())
    }

    pub fn ingest(path: impl AsRef<Path>, catalog: &LabelCatalog) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?), catalog)
    }

    pub fn read_jsonl(input: impl BufRead, catalog: &LabelCatalog) -> Result<Self> {
        let mut dataset = Dataset::default();
        let mut seen = HashSet::new();
        for (n, line) in input.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if rec.problem.trim().is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "`problem` must not be empty".into(),
                });
            }
            if !seen.insert(rec.id.clone()) {
                return Err(Error::DuplicateId(rec.id));
            }
            if let Some(labels) = rec.labels {
                let set: LabelSet = labels.into_iter().collect();
                catalog.check(&set)?;
                dataset.gold.insert(rec.id.clone(), set);
            }
            dataset.posts.push(Post {
                id: rec.id,
                problem: rec.problem,
                negative_take: rec.negative_take,
            });
        }
        Ok(dataset)
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for p in &self.posts {
            let rec = Record {
                id: p.id.clone(),
                problem: p.problem.clone(),
                negative_take: p.negative_take.clone(),
                labels: self
                    .gold
                    .get(&p.id)
                    .map(|s| s.iter().map(str::to_string).collect()),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
