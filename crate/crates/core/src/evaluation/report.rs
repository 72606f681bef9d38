use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{aggregate, confusion, mean_std, prf1, Aggregate, LabelMetrics};
use crate::error::Result;
use crate::ontology::{Category, LabelCatalog, LabelSet};

/// Per-label metrics averaged over folds. `std_f1` is the population
/// standard deviation across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: String,
    pub category: Option<Category>,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub model: String,
    pub labels: Vec<LabelSummary>,
    /// Averages of the per-label mean F1 values.
    pub aggregate: Aggregate,
    /// Spread across folds of the per-fold macro and weighted averages.
    pub macro_std: f64,
    pub weighted_std: f64,
    pub folds: usize,
}

impl ReportTable {
    /// Builds the table from per-fold metrics of each label in `scope`.
    pub(crate) fn from_folds(
        model: &str,
        per_fold: &[BTreeMap<String, LabelMetrics>],
        catalog: &LabelCatalog,
        scope: &[String],
    ) -> Self {
        let labels: Vec<LabelSummary> = scope
            .iter()
            .map(|id| {
                let rows: Vec<&LabelMetrics> = per_fold.iter().filter_map(|f| f.get(id)).collect();
                let col = |f: fn(&LabelMetrics) -> f64| mean_std(&rows.iter().map(|m| f(m)).collect::<Vec<_>>());
                let (mean_f1, std_f1) = col(|m| m.f1);
                LabelSummary {
                    label: id.clone(),
                    category: catalog.get(id).map(|l| l.category),
                    mean_f1,
                    std_f1,
                    precision: col(|m| m.precision).0,
                    recall: col(|m| m.recall).0,
                    accuracy: col(|m| m.accuracy).0,
                    folds: rows.len(),
                }
            })
            .collect();
        let means: BTreeMap<String, f64> = labels
            .iter()
            .filter(|l| l.folds > 0)
            .map(|l| (l.label.clone(), l.mean_f1))
            .collect();
        let fold_aggs: Vec<Aggregate> = per_fold
            .iter()
            .map(|f| {
                let f1 = f.iter().map(|(k, m)| (k.clone(), m.f1)).collect();
                aggregate(&f1, catalog, Some(scope))
            })
            .collect();
        Self {
            model: model.to_string(),
            labels,
            aggregate: aggregate(&means, catalog, Some(scope)),
            macro_std: mean_std(&fold_aggs.iter().map(|a| a.macro_f1).collect::<Vec<_>>()).1,
            weighted_std: mean_std(&fold_aggs.iter().map(|a| a.weighted_f1).collect::<Vec<_>>()).1,
            folds: per_fold.len(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,model,mean_f1,std_f1,precision,recall,accuracy\n");
        for l in &self.labels {
            let _ = writeln!(
                out,
                "{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
                l.label, self.model, l.mean_f1, l.std_f1, l.precision, l.recall, l.accuracy
            );
        }
        for (c, v) in &self.aggregate.per_category {
            let _ = writeln!(out, "avg_{},{},{v:.3},,,,", c.as_str(), self.model);
        }
        let _ = writeln!(out, "avg,{},{:.3},{:.3},,,", self.model, self.aggregate.macro_f1, self.macro_std);
        let _ = writeln!(
            out,
            "weighted_avg,{},{:.3},{:.3},,,",
            self.model, self.aggregate.weighted_f1, self.weighted_std
        );
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.labels.iter().map(|l| l.label.len()).max().unwrap_or(5).max(16);
        let mut out = String::new();
        let _ = writeln!(out, "model: {}  folds: {}  (± is population std across folds)", self.model, self.folds);
        let _ = writeln!(
            out,
            "{:<width$}  {:>13}  {:>9}  {:>6}  {:>8}",
            "label", "F1", "precision", "recall", "accuracy"
        );
        for l in &self.labels {
            let _ = writeln!(
                out,
                "{:<width$}  {:>13}  {:>9.3}  {:>6.3}  {:>8.3}",
                l.label,
                format!("{:.3} ± {:.3}", l.mean_f1, l.std_f1),
                l.precision,
                l.recall,
                l.accuracy
            );
        }
        for (c, v) in &self.aggregate.per_category {
            let _ = writeln!(out, "{:<width$}  {:>13.3}", format!("avg {}", c.as_str()), v);
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>13}",
            "avg",
            format!("{:.3} ± {:.3}", self.aggregate.macro_f1, self.macro_std)
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>13}",
            "weighted avg",
            format!("{:.3} ± {:.3}", self.aggregate.weighted_f1, self.weighted_std)
        );
        out
    }
}

/// Single-split report of predicted label sets against gold.
pub fn evaluate_predictions(
    model: &str,
    predictions: &BTreeMap<String, LabelSet>,
    gold: &BTreeMap<String, LabelSet>,
    catalog: &LabelCatalog,
    scope: Option<&[String]>,
) -> Result<ReportTable> {
    let scope: Vec<String> = match scope {
        Some(s) => s.to_vec(),
        None => catalog.ids().map(str::to_string).collect(),
    };
    let fold = scope
        .iter()
        .map(|id| Ok((id.clone(), prf1(id, &confusion(predictions, gold, id)?))))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ReportTable::from_folds(model, &[fold], catalog, &scope))
}
