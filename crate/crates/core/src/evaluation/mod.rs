//! Confusion counts, precision/recall/F1, macro and prior-weighted
//! aggregates, Cohen's kappa, cross-validation and report emission.

mod cv;
mod kappa;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ChanceBaseline, MajorityBaseline, ModelKind};
use crate::ontology::{Category, LabelCatalog, LabelSet};

pub(crate) use cv::job_seed;
pub use cv::{cross_validate, CvConfig, CvReport, CvResources, FoldAudit, JobFailure, RatioReport};
pub use kappa::{agreement_report, cohen_kappa, AgreementReport, CategoryKappa, ContingencyTable, KappaMode, KappaResult};
pub use report::{evaluate_predictions, LabelSummary, ReportTable};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_flags(predicted: &[bool], gold: &[bool]) -> Self {
        assert_eq!(predicted.len(), gold.len(), "one prediction per gold decision");
        let mut c = Self::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            c.add(p, g);
        }
        c
    }

    pub fn add(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
            accuracy: ratio(self.tp + self.tn, self.total()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Number of gold positives.
    pub support: u64,
}

/// Binary counts for `label` over every gold post.
pub fn confusion(
    predictions: &BTreeMap<String, LabelSet>,
    gold: &BTreeMap<String, LabelSet>,
    label: &str,
) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for (id, truth) in gold {
        let pred = predictions
            .get(id)
            .ok_or_else(|| Error::MissingPrediction(id.clone()))?;
        c.add(pred.contains(label), truth.contains(label));
    }
    Ok(c)
}

pub fn prf1(label: &str, counts: &ConfusionCounts) -> LabelMetrics {
    let m = counts.metrics();
    LabelMetrics {
        label: label.to_string(),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        accuracy: m.accuracy,
        support: counts.tp + counts.fn_,
    }
}

/// Macro, prior-weighted and per-category averages of per-label F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_category: BTreeMap<Category, f64>,
    pub labels: usize,
}

/// Averages F1 over `scope` (all catalog labels when `None`). Labels in
/// scope without a score count as 0 with a warning. The weighted mean uses
/// catalog priors normalized by their sum over the scope.
pub fn aggregate(f1: &BTreeMap<String, f64>, catalog: &LabelCatalog, scope: Option<&[String]>) -> Aggregate {
    let ids: Vec<&str> = match scope {
        Some(s) => s.iter().map(String::as_str).collect(),
        None => catalog.ids().collect(),
    };
    let score = |id: &str| match f1.get(id) {
        Some(v) => *v,
        None => {
            log::warn!("no F1 for label `{id}`; counted as 0");
            0.0
        }
    };
    let mut sum = 0.0;
    let (mut wsum, mut wtot) = (0.0, 0.0);
    let mut cats: BTreeMap<Category, (f64, usize)> = BTreeMap::new();
    for &id in &ids {
        let v = score(id);
        sum += v;
        if let Some(label) = catalog.get(id) {
            wsum += label.prior * v;
            wtot += label.prior;
            let e = cats.entry(label.category).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    let n = ids.len().max(1) as f64;
    Aggregate {
        macro_f1: sum / n,
        weighted_f1: if wtot > 0.0 { wsum / wtot } else { 0.0 },
        per_category: cats.into_iter().map(|(c, (s, k))| (c, s / k as f64)).collect(),
        labels: ids.len(),
    }
}

/// Expected per-label F1 of a baseline from catalog priors alone.
pub fn analytic_f1(kind: ModelKind, catalog: &LabelCatalog) -> Result<BTreeMap<String, f64>> {
    let f: fn(f64) -> f64 = match kind {
        ModelKind::Majority => MajorityBaseline::expected_f1,
        ModelKind::Chance => ChanceBaseline::expected_f1,
        other => {
            return Err(Error::InvalidConfig(format!(
                "no analytic expectation for model kind {other}"
            )))
        }
    };
    Ok(catalog.labels().iter().map(|l| (l.id.clone(), f(l.prior))).collect())
}

/// Population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    match values {
        [] => return (0.0, 0.0),
        [first, rest @ ..] if rest.iter().all(|v| v == first) => return (*first, 0.0),
        _ => {}
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sets(v: &[(&str, &[&str])]) -> BTreeMap<String, LabelSet> {
        v.iter()
            .map(|(id, ls)| (id.to_string(), ls.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn ten_post_tally() {
        let pred = [true, true, false, false, true, false, true, false, false, true];
        let gold = [true, false, true, false, true, false, false, false, true, true];
        let c = ConfusionCounts::from_flags(&pred, &gold);
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (3, 2, 2, 3));
        let inv: Vec<bool> = pred.iter().map(|p| !p).collect();
        let d = ConfusionCounts::from_flags(&inv, &gold);
        assert_eq!((d.tp, d.fp, d.fn_, d.tn), (c.fn_, c.tn, c.tp, c.fp));
    }

    #[test]
    fn confusion_needs_every_prediction() {
        let gold = sets(&[("a", &["anxiety"]), ("b", &[])]);
        let pred = sets(&[("a", &["anxiety"])]);
        assert!(matches!(confusion(&pred, &gold, "anxiety"), Err(Error::MissingPrediction(id)) if id == "b"));
        let pred = sets(&[("a", &["anxiety"]), ("b", &[])]);
        let c = confusion(&pred, &gold, "anxiety").unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 0, 0, 1));
    }

    #[test]
    fn prf1_cases() {
        let m = prf1("x", &ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 9 });
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
        let m = prf1("x", &ConfusionCounts { tp: 0, fp: 3, fn_: 2, tn: 5 });
        assert_eq!(m.f1, 0.0);
        let m = prf1("x", &ConfusionCounts { tp: 1782, fp: 4035 - 1782, fn_: 0, tn: 0 });
        assert!((m.f1 - 0.6127).abs() < 1e-4);
    }

    #[test]
    fn analytic_baselines_match_published_rows() {
        let catalog = LabelCatalog::load();
        let maj = aggregate(&analytic_f1(ModelKind::Majority, &catalog).unwrap(), &catalog, None);
        assert!((maj.macro_f1 - 0.24).abs() <= 0.01, "{}", maj.macro_f1);
        assert!((maj.weighted_f1 - 0.432).abs() <= 0.01, "{}", maj.weighted_f1);
        let chance = aggregate(&analytic_f1(ModelKind::Chance, &catalog).unwrap(), &catalog, None);
        assert!((chance.macro_f1 - 0.203).abs() <= 0.01);
        assert!((chance.weighted_f1 - 0.337).abs() <= 0.01);
        // values from an independent computation over the same priors
        assert!((maj.macro_f1 - 0.23935).abs() < 1e-4);
        assert!((maj.weighted_f1 - 0.43139).abs() < 1e-4);
        assert!((chance.macro_f1 - 0.20245).abs() < 1e-4);
        assert!((chance.weighted_f1 - 0.33661).abs() < 1e-4);
        assert!(analytic_f1(ModelKind::Cnn, &catalog).is_err());
    }

    #[test]
    fn perfect_scores_aggregate_to_one() {
        let catalog = LabelCatalog::load();
        let ones = catalog.ids().map(|id| (id.to_string(), 1.0)).collect();
        let a = aggregate(&ones, &catalog, None);
        assert!((a.macro_f1 - 1.0).abs() < 1e-12 && (a.weighted_f1 - 1.0).abs() < 1e-12);
        assert_eq!(a.per_category.len(), 3);
    }

    #[test]
    fn std_is_population() {
        assert_eq!(mean_std(&[0.5, 0.5, 0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn averages_within_label_range(scores in proptest::collection::vec(0.0f64..1.0, 31)) {
            let catalog = LabelCatalog::load();
            let f1: BTreeMap<String, f64> = catalog.ids().zip(&scores).map(|(id, s)| (id.to_string(), *s)).collect();
            let a = aggregate(&f1, &catalog, None);
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(a.macro_f1 >= lo - 1e-12 && a.macro_f1 <= hi + 1e-12);
            prop_assert!(a.weighted_f1 >= lo - 1e-12 && a.weighted_f1 <= hi + 1e-12);
        }

        #[test]
        fn uniform_priors_make_weighted_equal_macro(scores in proptest::collection::vec(0.0f64..1.0, 31)) {
            let base = LabelCatalog::load();
            let labels = base.labels().iter().cloned().map(|mut l| { l.prior = 0.3; l }).collect();
            let catalog = LabelCatalog::from_labels(labels).unwrap();
            let f1: BTreeMap<String, f64> = catalog.ids().zip(&scores).map(|(id, s)| (id.to_string(), *s)).collect();
            let a = aggregate(&f1, &catalog, None);
            prop_assert!((a.macro_f1 - a.weighted_f1).abs() < 1e-12);
        }

        #[test]
        fn majority_f1_is_closed_form(n in 10usize..500, k in 1usize..10) {
            let pos = (n * k / 10).max(1);
            let gold: Vec<bool> = (0..n).map(|i| i < pos).collect();
            let f1 = ConfusionCounts::from_flags(&vec![true; n], &gold).metrics().f1;
            let f = pos as f64 / n as f64;
            prop_assert!((f1 - 2.0 * f / (1.0 + f)).abs() < 1e-12);
        }
    }
}
