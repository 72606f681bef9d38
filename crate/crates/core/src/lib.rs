//! Multi-label classification of thinking errors, emotions and situations in
//! short self-reported posts.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod numerics;
pub mod ontology;
pub mod textprep;

pub use corpus::{Annotation, Dataset, Fold, FoldPlan, OversampleSpec, Post};
pub use embeddings::{EmbeddingMatrix, SentenceVectorProvider};
pub use error::{Error, Result};
pub use ontology::{Category, Label, LabelCatalog, LabelSet};
pub use textprep::Vocabulary;
