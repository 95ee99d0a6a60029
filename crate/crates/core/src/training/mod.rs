//! Pairwise ranking loss, reverse-mode gradients, AdamW, and the two-stage
//! fine-tuning schedule (multimodal pairs first, then multimodal plus
//! text-only pairs at a tenth of the learning rate).

mod data;
mod grad;
mod loss;
mod optimizer;
mod schedule;

use thiserror::Error;

pub use data::{pairs_from_records, TrainingSet};
pub use grad::{backward, batch_loss, BatchStats, FreezeSet, Gradients, PreferencePair};
pub use loss::{loss_score_gradients, pairwise_loss};
pub use optimizer::{adamw_step, AdamWConfig, OptimizerState};
pub use schedule::{
    train_two_stage, CheckpointEvent, DataFilter, LogEntry, StageConfig, TrainLog, TrainOptions,
};

use crate::dataset::DatasetError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("stage {0} has no training data")]
    EmptyStage(u8),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("record {id:?}: {source}")]
    Record {
        id: String,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl TrainError {
    /// True when the failure stems from invalid input or configuration.
    pub fn is_validation(&self) -> bool {
        match self {
            TrainError::Model(ModelError::Io { .. }) => false,
            TrainError::Dataset(e) => e.is_validation(),
            TrainError::Record { source, .. } => source.is_validation(),
            TrainError::Model(ModelError::Features(e)) => e.is_validation(),
            _ => true,
        }
    }
}
