use serde::{Deserialize, Serialize};

use super::CurationError;

/// Thresholds and seeds for the curation passes. None of the numeric
/// defaults is canonical; they are tunable starting points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    /// Estimated shingle Jaccard at or above which a record is a near-duplicate.
    pub similarity_threshold: f64,
    /// Tokens per shingle.
    pub shingle_size: usize,
    pub minhash_permutations: usize,
    pub judgment_confidence_min: f64,
    /// Chosen responses scoring strictly below this percentile of all chosen
    /// scores are regenerated.
    pub tau_low_percentile: f64,
    /// Pairs whose score margin is strictly below this are regenerated.
    pub tau_gap: f64,
    /// Probability that a reasoning response is generated directly rather
    /// than through a caption.
    pub direct_route_probability: f64,
    pub rng_seed: u64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: 0.9,
            shingle_size: 5,
            minhash_permutations: 128,
            judgment_confidence_min: 0.5,
            tau_low_percentile: 25.0,
            tau_gap: 0.5,
            direct_route_probability: 0.474,
            rng_seed: 0,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let bad = |msg: &str| Err(CurationError::Config(msg.to_string()));
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return bad("similarity_threshold must lie in (0, 1]");
        }
        if self.shingle_size == 0 {
            return bad("shingle_size must be at least 1");
        }
        if self.minhash_permutations < 16 {
            return bad("minhash_permutations must be at least 16");
        }
        if !(0.0..=1.0).contains(&self.judgment_confidence_min) {
            return bad("judgment_confidence_min must lie in [0, 1]");
        }
        if !(0.0..=100.0).contains(&self.tau_low_percentile) {
            return bad("tau_low_percentile must lie in [0, 100]");
        }
        if !self.tau_gap.is_finite() {
            return bad("tau_gap must be finite");
        }
        if !(0.0..=1.0).contains(&self.direct_route_probability) {
            return bad("direct_route_probability must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid() {
        CurationConfig::default().validate().unwrap();
    }

    #[test]
    fn ranges_enforced() {
        let mut c = CurationConfig { similarity_threshold: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        c.similarity_threshold = 1.0;
        c.minhash_permutations = 8;
        assert!(c.validate().is_err());
    }
}
