use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::report::ReportTable;
use super::{prf1, ConfusionCounts, LabelMetrics};
use crate::corpus::{oversample_flags, split_folds, Dataset, Fold, FoldPlan, OversampleSpec};
use crate::embeddings::{EmbeddingMatrix, SentenceVectorProvider};
use crate::error::{Error, Result};
use crate::models::{
    predict_all, train_binary, train_linear_bow, ChanceBaseline, CnnInput, GatedCnn,
    GruClassifier, GruInput, LossMode, ModelKind, TrainConfig,
};
use crate::ontology::LabelCatalog;
use crate::textprep::{bow_featurize, BowVector, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub kind: ModelKind,
    pub folds: usize,
    /// Seed of the fold shuffle; training seeds derive from `train.seed`.
    pub fold_seed: u64,
    /// Label scope; empty means the whole catalog.
    pub labels: Vec<String>,
    pub ratios: Vec<OversampleSpec>,
    pub train: TrainConfig,
    /// Worker threads for independent (fold, label) jobs.
    pub jobs: usize,
}

impl CvConfig {
    pub fn new(kind: ModelKind, train: TrainConfig) -> Self {
        Self {
            kind,
            folds: 10,
            fold_seed: train.seed,
            labels: Vec::new(),
            ratios: vec![train.ratio],
            train,
            jobs: 1,
        }
    }
}

/// Inputs the models need besides the corpus.
#[derive(Debug, Clone, Default)]
pub struct CvResources {
    pub embeddings: Option<Arc<EmbeddingMatrix>>,
    pub sentences: Option<SentenceVectorProvider>,
    pub vocab: Option<Vocabulary>,
}

/// Instance-identity check of one job: the test partition is evaluated once
/// per post and none of its posts reach the training stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub ratio: OversampleSpec,
    pub fold: usize,
    pub label: String,
    pub test_posts: usize,
    pub test_instances: usize,
    pub unique_test_ids: usize,
    pub stream_len: usize,
    pub test_ids_in_stream: usize,
    pub train_test_overlap: usize,
}

impl FoldAudit {
    pub fn is_clean(&self) -> bool {
        self.test_ids_in_stream == 0
            && self.train_test_overlap == 0
            && self.test_instances == self.test_posts
            && self.unique_test_ids == self.test_posts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub ratio: OversampleSpec,
    pub fold: usize,
    pub label: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ratio: OversampleSpec,
    pub table: ReportTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kind: ModelKind,
    pub plan: FoldPlan,
    pub ratios: Vec<RatioReport>,
    pub audits: Vec<FoldAudit>,
    pub failures: Vec<JobFailure>,
}

impl CvReport {
    pub fn audit_clean(&self) -> bool {
        self.audits.iter().all(FoldAudit::is_clean)
    }

    /// `model,ratio,macro_f1,macro_std,weighted_f1,weighted_std`, one row
    /// per ratio.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("model,ratio,macro_f1,macro_std,weighted_f1,weighted_std\n");
        for r in &self.ratios {
            let t = &r.table;
            out.push_str(&format!(
                "{},{},{:.3},{:.3},{:.3},{:.3}\n",
                self.kind, r.ratio, t.aggregate.macro_f1, t.macro_std, t.aggregate.weighted_f1, t.weighted_std
            ));
        }
        out
    }
}

enum Inputs {
    Cnn(Vec<CnnInput>),
    Gru(Vec<GruInput>),
    Bow(Vec<BowVector>, usize),
    Ids,
}

fn featurize(dataset: &Dataset, kind: ModelKind, res: &CvResources) -> Result<Inputs> {
    let missing = |what: &str| Error::InvalidConfig(format!("model kind {kind} needs {what}"));
    Ok(match kind {
        ModelKind::Cnn => {
            let emb = res.embeddings.as_ref().ok_or_else(|| missing("word vectors"))?;
            Inputs::Cnn(dataset.posts.iter().map(|p| CnnInput::from_post(p, emb)).collect::<Result<_>>()?)
        }
        ModelKind::Gru => {
            let provider = match (&res.sentences, &res.embeddings) {
                (Some(p), _) => p.clone(),
                (None, Some(e)) => SentenceVectorProvider::mean_pool(e.clone()),
                (None, None) => return Err(missing("sentence vectors or word vectors")),
            };
            Inputs::Gru(dataset.posts.iter().map(|p| GruInput::from_post(p, &provider)).collect::<Result<_>>()?)
        }
        ModelKind::Lr | ModelKind::Svm => {
            let vocab = res.vocab.as_ref().ok_or_else(|| missing("a vocabulary"))?;
            Inputs::Bow(dataset.posts.iter().map(|p| bow_featurize(p, vocab)).collect(), vocab.len())
        }
        ModelKind::Chance | ModelKind::Majority => Inputs::Ids,
    })
}

/// Seed of one (fold, label) job.
pub(crate) fn job_seed(base: u64, fold: usize, label_index: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(((fold as u64) << 32) | label_index as u64)
}

type JobResult = Result<(LabelMetrics, FoldAudit)>;

struct Job {
    ratio: OversampleSpec,
    fold: usize,
    label_index: usize,
}

struct Shared<'a> {
    cfg: &'a CvConfig,
    dataset: &'a Dataset,
    index: HashMap<&'a str, usize>,
    inputs: Inputs,
    plan: &'a FoldPlan,
    labels: &'a [String],
}

fn run_job(s: &Shared<'_>, job: &Job) -> Result<(LabelMetrics, FoldAudit)> {
    let label = &s.labels[job.label_index];
    let fold: &Fold = &s.plan.folds[job.fold];
    let idx = |ids: &[String]| -> Vec<usize> { ids.iter().map(|id| s.index[id.as_str()]).collect() };
    let (train_idx, val_idx, test_idx) = (idx(&fold.train), idx(&fold.validation), idx(&fold.test));
    let flag = |i: &usize| {
        s.dataset
            .gold
            .get(&s.dataset.posts[*i].id)
            .is_some_and(|set| set.contains(label))
    };
    let train_flags: Vec<bool> = train_idx.iter().map(flag).collect();
    let val_flags: Vec<bool> = val_idx.iter().map(flag).collect();
    let test_flags: Vec<bool> = test_idx.iter().map(flag).collect();
    let cfg = TrainConfig {
        ratio: job.ratio,
        seed: job_seed(s.cfg.train.seed, job.fold, job.label_index),
        ..s.cfg.train.clone()
    };

    let scores: Vec<f64> = match &s.inputs {
        Inputs::Cnn(xs) => {
            let pick = |ix: &[usize]| ix.iter().map(|&i| &xs[i]).collect::<Vec<_>>();
            let mut model = GatedCnn::new(xs[0].dim(), &cfg);
            train_binary(&mut model, label, &pick(&train_idx), &train_flags, &pick(&val_idx), &val_flags, &cfg)?;
            predict_all(&model, &pick(&test_idx))?
        }
        Inputs::Gru(xs) => {
            let pick = |ix: &[usize]| ix.iter().map(|&i| &xs[i]).collect::<Vec<_>>();
            let mut model = GruClassifier::new(xs[0].vectors.cols(), &cfg);
            train_binary(&mut model, label, &pick(&train_idx), &train_flags, &pick(&val_idx), &val_flags, &cfg)?;
            predict_all(&model, &pick(&test_idx))?
        }
        Inputs::Bow(xs, v) => {
            let pick = |ix: &[usize]| ix.iter().map(|&i| &xs[i]).collect::<Vec<_>>();
            let mode = if s.cfg.kind == ModelKind::Lr { LossMode::Logistic } else { LossMode::Hinge };
            let (model, _) =
                train_linear_bow(mode, label, *v, &pick(&train_idx), &train_flags, &pick(&val_idx), &val_flags, &cfg)?;
            test_idx.iter().map(|&i| model.probability(&xs[i])).collect()
        }
        Inputs::Ids => match s.cfg.kind {
            ModelKind::Majority => vec![1.0; test_idx.len()],
            _ => {
                let chance = ChanceBaseline::new(label, cfg.seed);
                test_idx.iter().map(|&i| chance.score(&s.dataset.posts[i].id)).collect()
            }
        },
    };

    let predicted: Vec<bool> = scores.iter().map(|p| *p >= 0.5).collect();
    let metrics = prf1(label, &ConfusionCounts::from_flags(&predicted, &test_flags));

    let test_ids: HashSet<&str> = fold.test.iter().map(String::as_str).collect();
    let stream: Vec<usize> = if s.cfg.kind.is_neural() || matches!(s.cfg.kind, ModelKind::Lr | ModelKind::Svm) {
        oversample_flags(&train_flags, job.ratio, cfg.seed, label)?
            .into_iter()
            .map(|k| train_idx[k])
            .collect()
    } else {
        Vec::new()
    };
    let audit = FoldAudit {
        ratio: job.ratio,
        fold: job.fold,
        label: label.clone(),
        test_posts: fold.test.len(),
        test_instances: scores.len(),
        unique_test_ids: test_idx.iter().collect::<HashSet<_>>().len(),
        stream_len: stream.len(),
        test_ids_in_stream: stream
            .iter()
            .filter(|&&i| test_ids.contains(s.dataset.posts[i].id.as_str()))
            .count(),
        train_test_overlap: fold.train.iter().filter(|id| test_ids.contains(id.as_str())).count(),
    };
    Ok((metrics, audit))
}

/// k-fold cross-validation of one model kind over a label scope and a list
/// of oversampling ratios. A failing (fold, label) job is recorded and
/// skipped; the report is assembled from the jobs that succeeded.
pub fn cross_validate(
    dataset: &Dataset,
    catalog: &LabelCatalog,
    cfg: &CvConfig,
    res: &CvResources,
) -> Result<CvReport> {
    cfg.train.validate()?;
    if cfg.ratios.is_empty() {
        return Err(Error::InvalidConfig("at least one oversampling ratio is required".into()));
    }
    let labels: Vec<String> = if cfg.labels.is_empty() {
        catalog.ids().map(str::to_string).collect()
    } else {
        for l in &cfg.labels {
            if !catalog.contains(l) {
                return Err(Error::UnknownLabel(l.clone()));
            }
        }
        cfg.labels.clone()
    };
    let plan = split_folds(dataset, cfg.folds, cfg.fold_seed)?;
    let shared = Shared {
        cfg,
        dataset,
        index: dataset.posts.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect(),
        inputs: featurize(dataset, cfg.kind, res)?,
        plan: &plan,
        labels: &labels,
    };

    let n_labels = labels.len();
    let jobs: Vec<Job> = cfg
        .ratios
        .iter()
        .flat_map(|&ratio| {
            (0..cfg.folds).flat_map(move |fold| (0..n_labels).map(move |label_index| Job { ratio, fold, label_index }))
        })
        .collect();
    let results: Vec<Mutex<Option<JobResult>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(job) = jobs.get(i) else { break };
        let out = run_job(&shared, job);
        log::info!(
            "{} ratio {} fold {} label {}: {}",
            cfg.kind,
            job.ratio,
            job.fold,
            labels[job.label_index],
            match &out {
                Ok((m, _)) => format!("f1 {:.3}", m.f1),
                Err(e) => e.to_string(),
            }
        );
        *results[i].lock().expect("result slot") = Some(out);
    };
    if cfg.jobs <= 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..cfg.jobs {
                scope.spawn(worker);
            }
        });
    }

    let mut per_ratio: BTreeMap<usize, Vec<BTreeMap<String, LabelMetrics>>> = BTreeMap::new();
    let mut audits = Vec::new();
    let mut failures = Vec::new();
    for (job, slot) in jobs.iter().zip(results) {
        let ratio_pos = cfg.ratios.iter().position(|r| *r == job.ratio).expect("ratio listed");
        let folds = per_ratio
            .entry(ratio_pos)
            .or_insert_with(|| vec![BTreeMap::new(); cfg.folds]);
        match slot.into_inner().expect("result slot").expect("every job ran") {
            Ok((metrics, audit)) => {
                folds[job.fold].insert(metrics.label.clone(), metrics);
                audits.push(audit);
            }
            Err(e) => failures.push(JobFailure {
                ratio: job.ratio,
                fold: job.fold,
                label: labels[job.label_index].clone(),
                error: e.to_string(),
            }),
        }
    }
    let ratios = per_ratio
        .into_iter()
        .map(|(pos, folds)| RatioReport {
            ratio: cfg.ratios[pos],
            table: ReportTable::from_folds(cfg.kind.as_str(), &folds, catalog, &labels),
        })
        .collect();
    Ok(CvReport {
        kind: cfg.kind,
        plan,
        ratios,
        audits,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth_generate;

    #[test]
    fn majority_cv_is_exact_and_stable() {
        let catalog = LabelCatalog::load();
        let data = synth_generate(&catalog, 400, 3);
        let mut cfg = CvConfig::new(ModelKind::Majority, TrainConfig::default());
        cfg.labels = vec!["anxiety".into(), "work".into()];
        let report = cross_validate(&data, &catalog, &cfg, &CvResources::default()).unwrap();
        assert!(report.failures.is_empty());
        assert!(report.audit_clean());
        let t = &report.ratios[0].table;
        assert_eq!(t.folds, 10);
        let anxiety = &t.labels[0];
        let f1s: Vec<f64> = report.plan.folds.iter().map(|f| {
            let pos = f.test.iter().filter(|id| data.gold[*id].contains("anxiety")).count() as f64;
            let prev = pos / f.test.len() as f64;
            2.0 * prev / (1.0 + prev)
        }).collect();
        assert!((anxiety.mean_f1 - super::super::mean_std(&f1s).0).abs() < 1e-12);
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let catalog = LabelCatalog::load();
        let mut data = synth_generate(&catalog, 200, 1);
        for set in data.gold.values_mut() {
            set.remove("guilt");
        }
        let vocab = Vocabulary::from_dataset(&data, 1).unwrap();
        let mut cfg = CvConfig::new(ModelKind::Svm, TrainConfig { max_epochs: 2, ..Default::default() });
        cfg.folds = 4;
        cfg.labels = vec!["guilt".into(), "anxiety".into()];
        cfg.jobs = 2;
        let res = CvResources { vocab: Some(vocab), ..Default::default() };
        let report = cross_validate(&data, &catalog, &cfg, &res).unwrap();
        assert_eq!(report.failures.len(), 4);
        assert!(report.failures.iter().all(|f| f.label == "guilt" && f.error.starts_with("NoPositives")));
        let t = &report.ratios[0].table;
        assert_eq!(t.labels[0].folds, 0);
        assert_eq!(t.labels[1].folds, 4);
        assert!(report.audit_clean());
    }

    #[test]
    fn sweep_emits_one_row_per_ratio() {
        let catalog = LabelCatalog::load();
        let data = synth_generate(&catalog, 300, 2);
        let vocab = Vocabulary::from_dataset(&data, 1).unwrap();
        let mut cfg = CvConfig::new(ModelKind::Lr, TrainConfig { max_epochs: 2, ..Default::default() });
        cfg.folds = 3;
        cfg.labels = vec!["anxiety".into()];
        cfg.ratios = OversampleSpec::EXPLORED.to_vec();
        let res = CvResources { vocab: Some(vocab), ..Default::default() };
        let report = cross_validate(&data, &catalog, &cfg, &res).unwrap();
        assert_eq!(report.sweep_csv().lines().count(), 5);
        let again = cross_validate(&data, &catalog, &cfg, &res).unwrap();
        assert_eq!(report, again);
    }
}
