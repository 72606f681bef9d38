use cbtnlu_bench::{corpus, vectors};
use cbtnlu_core::embeddings::{build_cooccurrence, corpus_streams, train_word_vectors, GloveConfig};
use cbtnlu_core::evaluation::{cross_validate, CvConfig, CvResources};
use cbtnlu_core::models::{ModelKind, TrainConfig};
use cbtnlu_core::textprep::bow_featurize;
use cbtnlu_core::{LabelCatalog, Vocabulary};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_glove(c: &mut Criterion) {
    let data = corpus(500);
    let vocab = Vocabulary::from_dataset(&data, 1).unwrap();
    let table = build_cooccurrence(corpus_streams(&data), &vocab, 10);
    let cfg = GloveConfig { dim: 50, epochs: 1, ..Default::default() };
    c.bench_function("glove co-occurrence 500 posts", |b| {
        b.iter(|| build_cooccurrence(corpus_streams(black_box(&data)), &vocab, 10))
    });
    c.bench_function("glove epoch 500 posts d=50", |b| b.iter(|| train_word_vectors(&table, &vocab, &cfg).unwrap()));
}

fn bench_featurize(c: &mut Criterion) {
    let data = corpus(500);
    let vocab = Vocabulary::from_dataset(&data, 1).unwrap();
    let emb = vectors(&data, 50);
    c.bench_function("bow featurize 500 posts", |b| {
        b.iter(|| data.posts.iter().map(|p| bow_featurize(p, &vocab).len()).sum::<usize>())
    });
    c.bench_function("embed tokens 500 posts d=50", |b| {
        b.iter(|| {
            data.posts
                .iter()
                .map(|p| emb.embed_tokens(&cbtnlu_core::textprep::tokenize(&p.problem)).rows())
                .sum::<usize>()
        })
    });
}

fn bench_cv(c: &mut Criterion) {
    let data = corpus(400);
    let catalog = LabelCatalog::load();
    let res = CvResources { vocab: Some(Vocabulary::from_dataset(&data, 1).unwrap()), ..Default::default() };
    let mut cfg = CvConfig::new(ModelKind::Lr, TrainConfig { max_epochs: 5, ..Default::default() });
    cfg.folds = 5;
    cfg.labels = vec!["anxiety".into(), "work".into(), "labelling".into()];
    let mut group = c.benchmark_group("cv");
    group.sample_size(10);
    group.bench_function("lr 5-fold 3 labels 400 posts", |b| {
        b.iter(|| cross_validate(&data, &catalog, &cfg, &res).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_glove, bench_featurize, bench_cv);
criterion_main!(benches);
