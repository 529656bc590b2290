//! Scoring hyperparameters.

use alloc::format;

use crate::error::{Error, Result};
use crate::similarity::Pooling;

/// Pairwise kernel applied to both the class embeddings and the pooled
/// patch descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Metric {
    #[default]
    Tanimoto,
    Cosine,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Tanimoto => "tanimoto",
            Metric::Cosine => "cosine",
        }
    }
}

impl core::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanimoto" => Ok(Metric::Tanimoto),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// All scalar knobs of the matching pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScoringConfig {
    /// GeM exponent.
    pub e: f64,
    /// Weight of the class-embedding similarity against the patch similarity.
    pub alpha: f64,
    /// Weight of the absolute score against the relative score.
    pub beta: f64,
    /// Softmax temperature across classes.
    pub tau: f64,
    /// Exponent applied to the objectness prior.
    pub gamma: f64,
    /// When false the objectness prior is treated as 1 for every proposal.
    pub prior: bool,
    /// Views averaged per class by top-K aggregation; clamped to the view count.
    pub top_k: usize,
    pub metric: Metric,
    /// Patch pooling; GeM uses `e`.
    pub pooling: Pooling,
    /// Minimum final score for a detection to be emitted.
    pub score_floor: Option<f64>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        default_config()
    }
}

/// `e = 1.5, alpha = 0.5, beta = 0.8, tau = 0.02, gamma = 0.1`, Tanimoto,
/// top-5 view averaging, prior on, no score floor.
pub fn default_config() -> ScoringConfig {
    ScoringConfig {
        e: 1.5,
        alpha: 0.5,
        beta: 0.8,
        tau: 0.02,
        gamma: 0.1,
        prior: true,
        top_k: 5,
        metric: Metric::Tanimoto,
        pooling: Pooling::Gem,
        score_floor: None,
    }
}

impl ScoringConfig {
    /// Checks every range constraint.
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: alloc::string::String) -> Result<()> {
            Err(Error::Config(msg))
        }
        if !(self.e.is_finite() && self.e > 0.0) {
            return bad(format!("e must be > 0, got {}", self.e));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must be in [0, 1], got {}", self.beta));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.top_k == 0 {
            return bad(format!("top_k must be >= 1, got {}", self.top_k));
        }
        if let Some(floor) = self.score_floor {
            if !floor.is_finite() {
                return bad(format!("score_floor must be finite, got {floor}"));
            }
        }
        Ok(())
    }
}
