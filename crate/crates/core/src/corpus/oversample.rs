use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::LabelSet;

/// Target positive:negative proportion of a training stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OversampleSpec {
    pub pos_units: u32,
    pub neg_units: u32,
}

impl OversampleSpec {
    pub const EXPLORED: [OversampleSpec; 4] = [
        OversampleSpec::new(1, 1),
        OversampleSpec::new(1, 3),
        OversampleSpec::new(1, 5),
        OversampleSpec::new(1, 7),
    ];

    pub const fn new(pos_units: u32, neg_units: u32) -> Self {
        Self {
            pos_units,
            neg_units,
        }
    }

    /// Parses `pos:neg` and requires the ratio to be one of the explored
    /// settings (1:1, 1:3, 1:5, 1:7).
    pub fn parse_explored(s: &str) -> Result<Self> {
        let spec: Self = s.parse()?;
        if Self::EXPLORED.contains(&spec) {
            Ok(spec)
        } else {
            Err(Error::InvalidConfig(format!(
                "ratio {spec} is not one of 1:1, 1:3, 1:5, 1:7"
            )))
        }
    }

    /// Number of positive instances needed for `negatives` negatives,
    /// rounded to the nearest integer.
    pub fn target_positives(&self, negatives: usize) -> usize {
        let num = negatives as u64 * self.pos_units as u64;
        let den = self.neg_units as u64;
        ((num + den / 2) / den) as usize
    }
}

impl Default for OversampleSpec {
    fn default() -> Self {
        Self::new(1, 1)
    }
}

impl fmt::Display for OversampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.pos_units, self.neg_units)
    }
}

impl FromStr for OversampleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("ratio `{s}` is not of the form pos:neg"));
        let (p, n) = s.trim().split_once(':').ok_or_else(bad)?;
        let p: u32 = p.trim().parse().map_err(|_| bad())?;
        let n: u32 = n.trim().parse().map_err(|_| bad())?;
        if p == 0 || n == 0 {
            return Err(bad());
        }
        Ok(Self::new(p, n))
    }
}

/// Index-level oversampling: `is_positive[i]` says whether training item
/// `i` is a positive. Returns a shuffled multiset of indices in which every
/// negative appears once and positives are duplicated (whole copies first,
/// then a seeded random remainder) up to the target ratio. Positives are
/// never dropped when they already exceed the target.
pub fn oversample_flags(
    is_positive: &[bool],
    spec: OversampleSpec,
    seed: u64,
    label: &str,
) -> Result<Vec<usize>> {
    let positives: Vec<usize> = (0..is_positive.len()).filter(|&i| is_positive[i]).collect();
    let negatives: Vec<usize> = (0..is_positive.len()).filter(|&i| !is_positive[i]).collect();
    if positives.is_empty() {
        return Err(Error::NoPositives(label.to_string()));
    }
    if negatives.is_empty() {
        return Err(Error::NoNegatives(label.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = spec.target_positives(negatives.len()).max(positives.len());
    let (copies, remainder) = (target / positives.len(), target % positives.len());

    let mut stream = negatives;
    stream.reserve(target);
    for _ in 0..copies {
        stream.extend_from_slice(&positives);
    }
    stream.extend(positives.choose_multiple(&mut rng, remainder).copied());
    stream.shuffle(&mut rng);
    Ok(stream)
}

/// Id-level wrapper over [`oversample_flags`].
pub fn oversample(
    train_ids: &[String],
    gold: &BTreeMap<String, LabelSet>,
    label: &str,
    spec: OversampleSpec,
    seed: u64,
) -> Result<Vec<String>> {
    let flags: Vec<bool> = train_ids
        .iter()
        .map(|id| gold.get(id).is_some_and(|s| s.contains(label)))
        .collect();
    Ok(oversample_flags(&flags, spec, seed, label)?
        .into_iter()
        .map(|i| train_ids[i].clone())
        .collect())
}
