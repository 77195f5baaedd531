//! Retriever fine-tuning without touching the base embedder.
//!
//! A square linear adapter is trained on (question, positive passage)
//! pairs with a multiple-negatives ranking loss: within a batch, every
//! other pair's passage serves as a negative. Embeddings stay frozen; only
//! the adapter matrix learns, which makes training cheap and the result a
//! small artifact that any provider can be wrapped with.

mod adapter;
mod mnr;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{
    apply_adapter, load_adapter, save_adapter, AdaptedProvider, AdapterMatrix,
};
pub use mnr::{mnr_gradient, mnr_loss, MnrGradients};
pub use trainer::{train_adapter, TrainOutcome};

use crate::index::{IndexError, ProviderError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} anchors vs {1} positives")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("adapter projection collapsed to zero norm")]
    DegenerateProjection,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("need at least {need} pairs for batch size {need}, got {got}")]
    TooFewPairs { need: usize, got: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("unknown positive passage '{0}'")]
    UnknownPassage(String),
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
    #[error("invalid adapter: {0}")]
    InvalidAdapter(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<IndexError> for TrainError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::ZeroVector => TrainError::DegenerateProjection,
            IndexError::DimMismatch(a, b) => TrainError::DimMismatch(a, b),
            other => TrainError::InvalidAdapter(other.to_string()),
        }
    }
}

/// Hyperparameters for adapter training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Similarity scale (inverse temperature) inside the softmax.
    pub scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 25,
            batch_size: 16,
            scale: 20.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    /// Reject configurations the trainer cannot run with. A zero learning
    /// rate is accepted here (useful for diagnostics); the CLI is stricter.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::Config(format!(
                "batch_size must be at least 2 (got {}); the loss needs in-batch negatives",
                self.batch_size
            )));
        }
        if self.epochs < 1 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(TrainError::Config(format!(
                "scale must be a positive finite number, got {}",
                self.scale
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(TrainError::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One supervised example: a question and the passage that answers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub question_id: String,
    pub question: String,
    pub positive_passage_id: String,
}

impl From<&crate::rag::QAPair> for TrainingPair {
    fn from(p: &crate::rag::QAPair) -> Self {
        TrainingPair {
            question_id: p.question_id.clone(),
            question: p.question.clone(),
            positive_passage_id: p.passage_id.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_degenerate_values() {
        let mut c = TrainConfig::default();
        c.batch_size = 1;
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));

        let mut c = TrainConfig::default();
        c.epochs = 0;
        assert!(c.validate().is_err());

        let mut c = TrainConfig::default();
        c.scale = 0.0;
        assert!(c.validate().is_err());

        let mut c = TrainConfig::default();
        c.learning_rate = -0.1;
        assert!(c.validate().is_err());

        let mut c = TrainConfig::default();
        c.learning_rate = 0.0;
        assert!(c.validate().is_ok(), "zero learning rate is allowed at this layer");
    }
}
