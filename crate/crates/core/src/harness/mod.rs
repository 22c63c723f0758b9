//! Training loop, best-epoch selection, evaluation and single-function
//! prediction, plus the corpus-to-bags extraction step they share with the
//! CLI.

pub mod batches;
pub mod extract;
pub mod metrics;
pub mod synthetic;
pub mod train;

pub use batches::{epoch_seed, make_batches, Batch};
pub use extract::{extract_source, extract_split, Skip, SkipEntry, SkipReport};
pub use metrics::{Metrics, Percentages};
pub use train::{evaluate, predict, score_bags, train, EpochRecord, Prediction, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AdamConfig, ModelError};
use crate::pathmine::MiningLimits;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub embedding_size: usize,
    pub dropout_rate: f64,
    pub limits: MiningLimits,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_count: u64,
    /// Thread count, 0 for all cores. Results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 1024,
            embedding_size: 128,
            dropout_rate: 0.25,
            limits: MiningLimits::default(),
            learning_rate: AdamConfig::default().learning_rate,
            seed: 0,
            min_count: 1,
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.embedding_size == 0 {
            return bad("embedding_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        self.limits.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, ..AdamConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.embedding_size, c.dropout_rate), (20, 1024, 128, 0.25));
        assert_eq!((c.limits.max_length, c.limits.max_width, c.limits.max_contexts), (8, 3, 200));
        assert!(c.validate().is_ok());
        assert!(TrainConfig { dropout_rate: 1.0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..c }.validate().is_err());
    }
}
