use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mean_std;
use crate::error::{Error, Result};
use crate::ontology::{Category, LabelCatalog, LabelSet};

/// 2×2 counts of annotator A (rows) against annotator B (columns), positive
/// class first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub yes_yes: u64,
    pub yes_no: u64,
    pub no_yes: u64,
    pub no_no: u64,
}

impl ContingencyTable {
    pub fn from_matrix(m: [[u64; 2]; 2]) -> Self {
        Self {
            yes_yes: m[0][0],
            yes_no: m[0][1],
            no_yes: m[1][0],
            no_no: m[1][1],
        }
    }

    pub fn add(&mut self, a: bool, b: bool) {
        match (a, b) {
            (true, true) => self.yes_yes += 1,
            (true, false) => self.yes_no += 1,
            (false, true) => self.no_yes += 1,
            (false, false) => self.no_no += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.yes_yes + self.yes_no + self.no_yes + self.no_no
    }

    /// Both annotators' classes swapped.
    pub fn swapped(&self) -> Self {
        Self {
            yes_yes: self.no_no,
            yes_no: self.no_yes,
            no_yes: self.yes_no,
            no_no: self.yes_yes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// Asymptotic standard error of Fleiss, Cohen and Everitt.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub observed: f64,
    pub expected: f64,
    pub n: u64,
}

/// Cohen's kappa with a 95% interval `κ ± 1.96·SE`.
pub fn cohen_kappa(table: &ContingencyTable) -> Result<KappaResult> {
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidConfig("contingency table is empty".into()));
    }
    let nf = n as f64;
    let p = [
        [table.yes_yes as f64 / nf, table.yes_no as f64 / nf],
        [table.no_yes as f64 / nf, table.no_no as f64 / nf],
    ];
    let row = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
    let col = [p[0][0] + p[1][0], p[0][1] + p[1][1]];
    let po = p[0][0] + p[1][1];
    let pe = row[0] * col[0] + row[1] * col[1];
    if 1.0 - pe <= 0.0 {
        if po >= 1.0 {
            return Ok(KappaResult {
                kappa: 1.0,
                se: 0.0,
                ci_low: 1.0,
                ci_high: 1.0,
                observed: po,
                expected: pe,
                n,
            });
        }
        return Err(Error::DegenerateTable(po));
    }
    let k = (po - pe) / (1.0 - pe);
    let a: f64 = (0..2)
        .map(|i| p[i][i] * (1.0 - (row[i] + col[i]) * (1.0 - k)).powi(2))
        .sum();
    let b = (1.0 - k).powi(2) * (p[0][1] * (col[0] + row[1]).powi(2) + p[1][0] * (col[1] + row[0]).powi(2));
    let c = (k - pe * (1.0 - k)).powi(2);
    let se = ((a + b - c).max(0.0) / (nf * (1.0 - pe).powi(2))).sqrt();
    Ok(KappaResult {
        kappa: k,
        se,
        ci_low: k - 1.96 * se,
        ci_high: k + 1.96 * se,
        observed: po,
        expected: pe,
        n,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    /// One table per category pooling every (post, label) decision.
    #[default]
    Pooled,
    /// Mean of per-label kappas within the category.
    PerLabelMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryKappa {
    pub category: Category,
    pub table: ContingencyTable,
    pub result: KappaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub mode: KappaMode,
    /// Number of posts annotated by both annotators.
    pub posts: usize,
    pub categories: Vec<CategoryKappa>,
}

/// Per-category agreement over the posts both annotators labelled.
pub fn agreement_report(
    a: &BTreeMap<String, LabelSet>,
    b: &BTreeMap<String, LabelSet>,
    catalog: &LabelCatalog,
    mode: KappaMode,
) -> Result<AgreementReport> {
    let shared: Vec<(&LabelSet, &LabelSet)> = a
        .iter()
        .filter_map(|(id, la)| b.get(id).map(|lb| (la, lb)))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoDoublyAnnotatedPosts);
    }
    let table_for = |labels: &[&str]| {
        let mut t = ContingencyTable::default();
        for (la, lb) in &shared {
            for l in labels {
                t.add(la.contains(l), lb.contains(l));
            }
        }
        t
    };
    let mut categories = Vec::new();
    for category in Category::ALL {
        let ids: Vec<&str> = catalog.labels_of(category).iter().map(|l| l.id.as_str()).collect();
        let table = table_for(&ids);
        let result = match mode {
            KappaMode::Pooled => cohen_kappa(&table)?,
            KappaMode::PerLabelMean => {
                let per: Vec<KappaResult> = ids
                    .iter()
                    .map(|l| cohen_kappa(&table_for(&[l])))
                    .collect::<Result<_>>()?;
                let pick = |f: fn(&KappaResult) -> f64| mean_std(&per.iter().map(f).collect::<Vec<_>>()).0;
                KappaResult {
                    kappa: pick(|r| r.kappa),
                    se: pick(|r| r.se),
                    ci_low: pick(|r| r.ci_low),
                    ci_high: pick(|r| r.ci_high),
                    observed: pick(|r| r.observed),
                    expected: pick(|r| r.expected),
                    n: table.total(),
                }
            }
        };
        categories.push(CategoryKappa {
            category,
            table,
            result,
        });
    }
    Ok(AgreementReport {
        mode,
        posts: shared.len(),
        categories,
    })
}
