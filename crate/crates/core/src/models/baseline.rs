use sha2::{Digest, Sha256};

/// Fair coin per (label, post), derived from a seed so that predictions do
/// not depend on evaluation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChanceBaseline {
    pub label: String,
    pub seed: u64,
}

impl ChanceBaseline {
    pub fn new(label: &str, seed: u64) -> Self {
        Self {
            label: label.to_string(),
            seed,
        }
    }

    pub fn predict(&self, post_id: &str) -> bool {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.label.as_bytes());
        hasher.update([0]);
        hasher.update(post_id.as_bytes());
        hasher.finalize()[0] & 1 == 1
    }

    pub fn score(&self, post_id: &str) -> f64 {
        if self.predict(post_id) {
            1.0
        } else {
            0.0
        }
    }

    /// Plug-in expected F1 at prevalence `f`: precision `f`, recall ½.
    pub fn expected_f1(prevalence: f64) -> f64 {
        prevalence / (prevalence + 0.5)
    }
}

/// Predicts every post positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MajorityBaseline;

impl MajorityBaseline {
    pub fn predict(&self, _post_id: &str) -> bool {
        true
    }

    pub fn score(&self, _post_id: &str) -> f64 {
        1.0
    }

    /// F1 of the always-positive rule at prevalence `f`.
    pub fn expected_f1(prevalence: f64) -> f64 {
        2.0 * prevalence / (1.0 + prevalence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ConfusionCounts;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chance_is_seeded_and_fair() {
        let c = ChanceBaseline::new("anxiety", 7);
        let ids: Vec<String> = (0..20000).map(|i| format!("p{i}")).collect();
        let a: Vec<bool> = ids.iter().map(|id| c.predict(id)).collect();
        let b: Vec<bool> = ids.iter().map(|id| c.predict(id)).collect();
        assert_eq!(a, b);
        let rate = a.iter().filter(|x| **x).count() as f64 / a.len() as f64;
        assert!((rate - 0.5).abs() < 0.015, "{rate}");
        let other = ChanceBaseline::new("anxiety", 8);
        assert_ne!(a, ids.iter().map(|id| other.predict(id)).collect::<Vec<_>>());
    }

    #[test]
    fn chance_f1_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in [0.05, 0.2, 0.6] {
            let gold: Vec<bool> = (0..40000).map(|_| rng.random_bool(f)).collect();
            let c = ChanceBaseline::new("x", 3);
            let pred: Vec<bool> = (0..gold.len()).map(|i| c.predict(&i.to_string())).collect();
            let f1 = ConfusionCounts::from_flags(&pred, &gold).metrics().f1;
            assert!((f1 - ChanceBaseline::expected_f1(f)).abs() < 0.02, "f={f}: {f1}");
        }
    }

    #[test]
    fn majority_f1_is_exact() {
        let gold: Vec<bool> = (0..4035).map(|i| i < 1782).collect();
        let pred = vec![true; gold.len()];
        let f1 = ConfusionCounts::from_flags(&pred, &gold).metrics().f1;
        let f = 1782.0 / 4035.0;
        assert!((f1 - MajorityBaseline::expected_f1(f)).abs() < 1e-12);
        assert!((f1 - 0.6127).abs() < 1e-4);
    }
}
