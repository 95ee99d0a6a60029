//! Desk-scale reward model: byte tokenizer, affine visual projector, pre-norm
//! causal transformer, and a fully connected reward head reading the final
//! hidden state at the EOS position that follows the response.

mod checkpoint;
mod config;
mod encode;
pub(crate) mod ops;
mod params;
pub mod tokenizer;
pub(crate) mod transformer;

use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, parameters_from_bytes, save_checkpoint};
pub use config::ModelConfig;
pub use encode::{encode_input, pool_features, EncodedInput};
pub use params::{
    decays, group_of, init_parameters, Block, Parameters, Tensor, GROUP_EMBED, GROUP_FINAL_NORM,
    GROUP_PROJECTOR, GROUP_REWARD_HEAD,
};
pub use transformer::{final_hidden_states, forward};

use crate::dataset::{FeatureStore, ImageFeatures};
use crate::scoring::{ScoreError, ScoreRequest, Scorer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("input of {len} tokens exceeds max_seq_len {max}")]
    TooLong { len: usize, max: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in layer {layer} ({site})")]
    NonFinite { layer: usize, site: &'static str },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Features(#[from] crate::dataset::DatasetError),
}

/// `forward(params, encode_input(prompt, response, image))`.
pub fn score(
    params: &Parameters,
    prompt: &str,
    response: &str,
    image: Option<&ImageFeatures>,
) -> Result<f64, ModelError> {
    forward(params, &encode_input(&params.config, prompt, response, image)?)
}

pub struct ScoreItem<'a> {
    pub prompt: &'a str,
    pub response: &'a str,
    pub image: Option<&'a ImageFeatures>,
}

/// Scores items independently in parallel; each result equals the
/// sequential [`score`] of that item.
pub fn score_batch(params: &Parameters, items: &[ScoreItem<'_>]) -> Vec<Result<f64, ModelError>> {
    items
        .par_iter()
        .map(|it| score(params, it.prompt, it.response, it.image))
        .collect()
}

/// A trained model behind the [`Scorer`] interface, resolving image
/// references through a feature store.
pub struct ModelScorer {
    params: Arc<Parameters>,
    features: FeatureStore,
}

impl ModelScorer {
    pub fn new(params: Parameters, features: FeatureStore) -> Self {
        Self { params: Arc::new(params), features }
    }

    pub fn from_checkpoint(path: &Path, feature_root: impl Into<PathBuf>) -> Result<Self, ModelError> {
        Ok(Self::new(load_checkpoint(path)?, FeatureStore::new(feature_root)))
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }
}

impl Scorer for ModelScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let image = request
            .image_ref
            .map(|r| self.features.load(r))
            .transpose()
            .map_err(|e| ScoreError(e.to_string()))?;
        score(&self.params, request.prompt, request.response, image.as_deref())
            .map_err(|e| ScoreError(e.to_string()))
    }
}
