//! The trainable head: inverted dropout, one 4-way fully-connected layer and
//! softmax, fitted with cross-entropy and Adam on frozen features.

mod adam;
mod file;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use file::{read_head, write_head, HEAD_MAGIC, HEAD_VERSION};
pub use model::{dropout, gradients, logits, loss, softmax, Gradients, HeadParameters, Mode};
pub use train::{predict, train, train_epochs, LabeledFeatures, Prediction, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("dimension mismatch: expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training samples have inconsistent dimensions")]
    InconsistentDimensions,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("invalid train config: {0}")]
    InvalidConfig(String),

    #[error("bad head parameter file: {reason}")]
    BadParameterFile { reason: String },
}

/// Head optimization settings. Defaults: 3 epochs, batch 32, learning rate
/// 0.001, dropout 0.5, Adam (0.9, 0.999, 1e-8).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Weight each sample's loss by `n / (4 · n_class)`. Off by default.
    pub class_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch_size: 32,
            learning_rate: 0.001,
            dropout_rate: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            class_weights: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HeadError> {
        let bad = |what: &str| Err(HeadError::InvalidConfig(what.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must be in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return bad("adam_beta1 must be in (0, 1)");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam_beta2 must be in (0, 1)");
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.epochs, c.batch_size), (3, 32));
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.dropout_rate, 0.5);
    }

    #[test]
    fn invariants_rejected() {
        let cases = [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { dropout_rate: 1.0, ..Default::default() },
            TrainConfig { dropout_rate: -0.1, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { adam_beta1: 1.0, ..Default::default() },
            TrainConfig { adam_beta2: 0.0, ..Default::default() },
            TrainConfig { adam_epsilon: 0.0, ..Default::default() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
