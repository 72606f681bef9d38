use std::sync::Arc;

use cbtnlu_core::corpus::{split_folds, synth_generate};
use cbtnlu_core::embeddings::{build_cooccurrence, corpus_streams, train_word_vectors, GloveConfig};
use cbtnlu_core::models::{
    train_binary, train_linear_bow, CnnInput, Features, GatedCnn, LossMode, ModelBundle, ModelKind,
    TrainConfig, TrainedModel,
};
use cbtnlu_core::evaluation::ConfusionCounts;
use cbtnlu_core::textprep::{bow_featurize, BowVector};
use cbtnlu_core::{Dataset, EmbeddingMatrix, LabelCatalog, Post, Vocabulary};

struct Fixture {
    catalog: LabelCatalog,
    data: Dataset,
    vocab: Vocabulary,
    emb: Arc<EmbeddingMatrix>,
}

fn fixture() -> Fixture {
    let catalog = LabelCatalog::load();
    let data = synth_generate(&catalog, 1500, 7);
    let vocab = Vocabulary::from_dataset(&data, 1).unwrap();
    let table = build_cooccurrence(corpus_streams(&data), &vocab, 10);
    let cfg = GloveConfig { dim: 24, epochs: 150, seed: 3, ..Default::default() };
    let emb = Arc::new(train_word_vectors(&table, &vocab, &cfg).unwrap().embeddings);
    Fixture { catalog, data, vocab, emb }
}

fn split<'a, T>(data: &Dataset, items: &'a [T], ids: &[String], label: &str) -> (Vec<&'a T>, Vec<bool>) {
    let index: std::collections::HashMap<&str, usize> =
        data.posts.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let xs = ids.iter().map(|id| &items[index[id.as_str()]]).collect();
    let ys = ids.iter().map(|id| data.gold[id].contains(label)).collect();
    (xs, ys)
}

fn f1(scores: &[f64], gold: &[bool]) -> f64 {
    let pred: Vec<bool> = scores.iter().map(|s| *s >= 0.5).collect();
    ConfusionCounts::from_flags(&pred, gold).metrics().f1
}

#[test]
fn cnn_learns_planted_labels_and_predicts_them() {
    let fx = fixture();
    let plan = split_folds(&fx.data, 10, 1).unwrap();
    let fold = &plan.folds[0];
    let inputs: Vec<CnnInput> = fx.data.posts.iter().map(|p| CnnInput::from_post(p, &fx.emb).unwrap()).collect();
    let cfg = TrainConfig { max_epochs: 30, patience: 3, seed: 5, ..Default::default() };

    let mut bundle = ModelBundle::new(ModelKind::Cnn, cfg.clone(), Features::Words(fx.emb.clone()));
    for label in ["anxiety", "work"] {
        let (tr, tr_y) = split(&fx.data, &inputs, &fold.train, label);
        let (va, va_y) = split(&fx.data, &inputs, &fold.validation, label);
        let mut model = GatedCnn::new(fx.emb.dim(), &cfg);
        let report = train_binary(&mut model, label, &tr, &tr_y, &va, &va_y, &cfg).unwrap();
        assert!(report.best_val_f1 >= 0.9, "{label}: {}", report.best_val_f1);

        let mut again = GatedCnn::new(fx.emb.dim(), &cfg);
        let replay = train_binary(&mut again, label, &tr, &tr_y, &va, &va_y, &cfg).unwrap();
        assert_eq!(report.history, replay.history);
        assert_eq!(model, again);
        bundle.insert(label, TrainedModel::Cnn(model), Some(&report));
    }

    let post = Post::new("probe", "I was so anxious and worried about the bus today.", "Nervous again.");
    let pred = bundle.predict(&post, &fx.catalog, 0.5).unwrap();
    assert!(pred.labels.contains("anxiety"), "{:?}", pred.scores);
    assert!(!pred.labels.contains("work"), "{:?}", pred.scores);
    assert_eq!(pred.missing.len(), fx.catalog.len() - 2);
}

#[test]
fn cnn_training_loss_mostly_decreases() {
    let fx = fixture();
    let plan = split_folds(&fx.data, 10, 2).unwrap();
    let fold = &plan.folds[0];
    let inputs: Vec<CnnInput> = fx.data.posts.iter().map(|p| CnnInput::from_post(p, &fx.emb).unwrap()).collect();
    let cfg = TrainConfig { max_epochs: 6, patience: 6, seed: 9, ..Default::default() };
    let (tr, tr_y) = split(&fx.data, &inputs, &fold.train, "depression");
    let (va, va_y) = split(&fx.data, &inputs, &fold.validation, "depression");
    let mut model = GatedCnn::new(fx.emb.dim(), &cfg);
    let report = train_binary(&mut model, "depression", &tr, &tr_y, &va, &va_y, &cfg).unwrap();
    let losses: Vec<f64> = report.history.iter().map(|h| h.loss).collect();
    let drops = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(drops >= 4, "{losses:?}");
}

#[test]
fn bag_of_words_baselines_beat_chance() {
    let fx = fixture();
    let plan = split_folds(&fx.data, 10, 3).unwrap();
    let fold = &plan.folds[0];
    let bows: Vec<BowVector> = fx.data.posts.iter().map(|p| bow_featurize(p, &fx.vocab)).collect();
    let cfg = TrainConfig { max_epochs: 10, patience: 3, seed: 4, ..Default::default() };
    for mode in [LossMode::Hinge, LossMode::Logistic] {
        for label in ["anger", "health", "labelling"] {
            let (tr, tr_y) = split(&fx.data, &bows, &fold.train, label);
            let (va, va_y) = split(&fx.data, &bows, &fold.validation, label);
            let (te, te_y) = split(&fx.data, &bows, &fold.test, label);
            let (model, _) =
                train_linear_bow(mode, label, fx.vocab.len(), &tr, &tr_y, &va, &va_y, &cfg).unwrap();
            let scores: Vec<f64> = te.iter().map(|x| model.probability(x)).collect();
            let prevalence = te_y.iter().filter(|y| **y).count() as f64 / te_y.len() as f64;
            let chance = prevalence / (prevalence + 0.5);
            assert!(f1(&scores, &te_y) > chance, "{mode:?} {label}");
        }
    }
}
