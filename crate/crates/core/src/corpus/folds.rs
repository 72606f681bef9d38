use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Train/validation/test post ids for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Shuffles the dataset once with `seed`, cuts it into `k` contiguous
/// chunks (the first `n % k` chunks get one extra post), and rotates:
/// fold `i` tests on chunk `i`, validates on chunk `i + 1 mod k` and
/// trains on the rest.
pub fn split_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = dataset.len();
    if k < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 folds for train/validation/test, got {k}"
        )));
    }
    if n < k * 10 {
        return Err(Error::TooSmall {
            size: n,
            required: k * 10,
        });
    }
    let mut ids = dataset.ids();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (base, extra) = (n / k, n % k);
    let mut chunks = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        chunks.push(&ids[start..start + len]);
        start += len;
    }

    let folds = (0..k)
        .map(|i| {
            let v = (i + 1) % k;
            let train = chunks
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i && *j != v)
                .flat_map(|(_, c)| c.iter().cloned())
                .collect();
            Fold {
                train,
                validation: chunks[v].to_vec(),
                test: chunks[i].to_vec(),
            }
        })
        .collect();
    Ok(FoldPlan { k, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Post;
    use proptest::prelude::*;
    use std::collections::{HashMap, HashSet};

    fn dataset(n: usize) -> Dataset {
        Dataset {
            posts: (0..n)
                .map(|i| Post::new(&format!("p{i}"), "text", ""))
                .collect(),
            gold: Default::default(),
        }
    }

    #[test]
    fn uneven_ten_fold_split_sizes() {
        let plan = split_folds(&dataset(4035), 10, 1).unwrap();
        for f in &plan.folds {
            assert!(f.test.len() == 403 || f.test.len() == 404);
            assert!(f.validation.len() == 403 || f.validation.len() == 404);
            assert_eq!(f.train.len() + f.validation.len() + f.test.len(), 4035);
        }
    }

    #[test]
    fn deterministic() {
        let d = dataset(120);
        assert_eq!(split_folds(&d, 10, 5).unwrap(), split_folds(&d, 10, 5).unwrap());
        assert_ne!(split_folds(&d, 10, 5).unwrap(), split_folds(&d, 10, 6).unwrap());
    }

    #[test]
    fn each_post_tested_exactly_once() {
        let plan = split_folds(&dataset(100), 10, 9).unwrap();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for f in &plan.folds {
            for id in &f.test {
                *counts.entry(id).or_default() += 1;
            }
        }
        assert_eq!(counts.len(), 100);
        assert!(counts.values().all(|&c| c == 1));
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            split_folds(&dataset(99), 10, 0),
            Err(Error::TooSmall { size: 99, required: 100 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let plan = split_folds(&dataset(30), 3, 2).unwrap();
        assert_eq!(FoldPlan::from_json(&plan.to_json().unwrap()).unwrap(), plan);
    }

    proptest! {
        #[test]
        fn folds_form_disjoint_cover(n in 30usize..300, k in 3usize..11, seed in any::<u64>()) {
            prop_assume!(n >= k * 10);
            let d = dataset(n);
            let plan = split_folds(&d, k, seed).unwrap();
            let all: HashSet<String> = d.ids().into_iter().collect();
            let mut tested = HashSet::new();
            for f in &plan.folds {
                let tr: HashSet<_> = f.train.iter().cloned().collect();
                let va: HashSet<_> = f.validation.iter().cloned().collect();
                let te: HashSet<_> = f.test.iter().cloned().collect();
                prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
                let union: HashSet<_> = tr.union(&va).cloned().collect::<HashSet<_>>().union(&te).cloned().collect();
                prop_assert_eq!(&union, &all);
                for id in te {
                    prop_assert!(tested.insert(id));
                }
            }
            prop_assert_eq!(tested, all);
        }
    }
}
