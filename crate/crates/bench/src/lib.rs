//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use cbtnlu_core::corpus::synth_generate;
use cbtnlu_core::embeddings::{build_cooccurrence, corpus_streams, train_word_vectors, GloveConfig};
use cbtnlu_core::{Dataset, EmbeddingMatrix, LabelCatalog, Vocabulary};

/// A seeded synthetic corpus of `n` posts.
pub fn corpus(n: usize) -> Dataset {
    synth_generate(&LabelCatalog::load(), n, 42)
}

/// Word vectors of width `dim` trained briefly on `corpus`.
pub fn vectors(corpus: &Dataset, dim: usize) -> Arc<EmbeddingMatrix> {
    let vocab = Vocabulary::from_dataset(corpus, 1).expect("non-empty corpus");
    let table = build_cooccurrence(corpus_streams(corpus), &vocab, 10);
    let cfg = GloveConfig { dim, epochs: 5, seed: 1, ..Default::default() };
    Arc::new(train_word_vectors(&table, &vocab, &cfg).expect("trainable table").embeddings)
}
