use std::collections::HashMap;

use super::{
    train_binary, train_linear_bow, ChanceBaseline, CnnInput, Features, GatedCnn, GruClassifier,
    GruInput, LossMode, MajorityBaseline, ModelBundle, ModelKind, TrainConfig, TrainReport, TrainedModel,
};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::textprep::bow_featurize;

/// Trains one model per label on `train_ids`, selecting epochs on
/// `val_ids`, and collects them in a bundle. Label `i` of `labels` trains
/// with seed derived from `cfg.seed` and `i`, as fold 0 of a
/// cross-validation run would.
pub fn fit_bundle(
    kind: ModelKind,
    features: Features,
    dataset: &Dataset,
    labels: &[String],
    train_ids: &[String],
    val_ids: &[String],
    cfg: &TrainConfig,
) -> Result<(ModelBundle, Vec<TrainReport>)> {
    cfg.validate()?;
    let index: HashMap<&str, usize> = dataset.posts.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let positions = |ids: &[String]| -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::MissingPrediction(id.clone())))
            .collect()
    };
    let (train_idx, val_idx) = (positions(train_ids)?, positions(val_ids)?);
    let flags = |ix: &[usize], label: &str| -> Vec<bool> {
        ix.iter()
            .map(|&i| dataset.gold.get(&dataset.posts[i].id).is_some_and(|s| s.contains(label)))
            .collect()
    };

    enum Inputs {
        Cnn(Vec<CnnInput>),
        Gru(Vec<GruInput>, usize),
        Bow(Vec<crate::textprep::BowVector>, usize),
        Ids,
    }
    let inputs = match (&features, kind) {
        (Features::Words(emb), ModelKind::Cnn) => Inputs::Cnn(
            dataset.posts.iter().map(|p| CnnInput::from_post(p, emb)).collect::<Result<_>>()?,
        ),
        (Features::Sentences(provider), ModelKind::Gru) => Inputs::Gru(
            dataset.posts.iter().map(|p| GruInput::from_post(p, provider)).collect::<Result<_>>()?,
            provider.dim(),
        ),
        (Features::Bow(vocab), ModelKind::Lr | ModelKind::Svm) => {
            Inputs::Bow(dataset.posts.iter().map(|p| bow_featurize(p, vocab)).collect(), vocab.len())
        }
        (Features::Nothing, ModelKind::Chance | ModelKind::Majority) => Inputs::Ids,
        _ => return Err(Error::InvalidConfig(format!("model kind {kind} cannot use the given features"))),
    };

    let mut bundle = ModelBundle::new(kind, cfg.clone(), features.clone());
    let mut reports = Vec::new();
    for (label_index, label) in labels.iter().enumerate() {
        let cfg = TrainConfig { seed: crate::evaluation::job_seed(cfg.seed, 0, label_index), ..cfg.clone() };
        let (tr_y, va_y) = (flags(&train_idx, label), flags(&val_idx, label));
        let (model, report) = match &inputs {
            Inputs::Cnn(xs) => {
                let pick = |ix: &[usize]| ix.iter().map(|&i| &xs[i]).collect::<Vec<_>>();
                let mut m = GatedCnn::new(xs[0].dim(), &cfg);
                let r = train_binary(&mut m, label, &pick(&train_idx), &tr_y, &pick(&val_idx), &va_y, &cfg)?;
                (TrainedModel::Cnn(m), Some(r))
            }
            Inputs::Gru(xs, dim) => {
                let pick = |ix: &[usize]| ix.iter().map(|&i| &xs[i]).collect::<Vec<_>>();
                let mut m = GruClassifier::new(*dim, &cfg);
                let r = train_binary(&mut m, label, &pick(&train_idx), &tr_y, &pick(&val_idx), &va_y, &cfg)?;
                (TrainedModel::Gru(m), Some(r))
            }
            Inputs::Bow(xs, v) => {
                let pick = |ix: &[usize]| ix.iter().map(|&i| &xs[i]).collect::<Vec<_>>();
                let mode = if kind == ModelKind::Lr { LossMode::Logistic } else { LossMode::Hinge };
                let (m, r) = train_linear_bow(mode, label, *v, &pick(&train_idx), &tr_y, &pick(&val_idx), &va_y, &cfg)?;
                (TrainedModel::Linear(m), Some(r))
            }
            Inputs::Ids if kind == ModelKind::Chance => (TrainedModel::Chance(ChanceBaseline::new(label, cfg.seed)), None),
            Inputs::Ids => (TrainedModel::Majority(MajorityBaseline), None),
        };
        bundle.insert(label, model, report.as_ref());
        reports.extend(report);
    }
    Ok((bundle, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_folds, synth_generate};
    use crate::ontology::LabelCatalog;
    use crate::textprep::Vocabulary;

    #[test]
    fn fits_one_model_per_label() {
        let catalog = LabelCatalog::load();
        let data = synth_generate(&catalog, 300, 4);
        let plan = split_folds(&data, 10, 1).unwrap();
        let vocab = Vocabulary::from_dataset(&data, 1).unwrap();
        let labels = vec!["anxiety".to_string(), "relationships".to_string()];
        let cfg = TrainConfig { max_epochs: 3, ..Default::default() };
        let f = &plan.folds[0];
        let (bundle, reports) =
            fit_bundle(ModelKind::Svm, Features::Bow(vocab), &data, &labels, &f.train, &f.validation, &cfg).unwrap();
        assert_eq!(bundle.labels().collect::<Vec<_>>(), ["anxiety", "relationships"]);
        assert_eq!(reports.len(), 2);

        let (bundle, reports) =
            fit_bundle(ModelKind::Majority, Features::Nothing, &data, &labels, &f.train, &f.validation, &cfg).unwrap();
        assert_eq!(bundle.len(), 2);
        assert!(reports.is_empty());
    }

    #[test]
    fn rejects_mismatched_features() {
        let catalog = LabelCatalog::load();
        let data = synth_generate(&catalog, 50, 4);
        let ids = data.ids();
        let err = fit_bundle(ModelKind::Cnn, Features::Nothing, &data, &[], &ids, &ids, &TrainConfig::default());
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }
}
