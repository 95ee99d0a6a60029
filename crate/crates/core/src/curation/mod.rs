//! Three-stage preference-data curation.
//!
//! Stage 1 removes exact duplicates (content fingerprint), near-duplicates
//! (MinHash over token shingles of prompt and chosen response) and
//! ambiguous or low-confidence judgments. Stage 2 scores every pair with a
//! surrogate reward model and regenerates weak chosen responses. Stage 3
//! produces reasoning-style responses directly or through an image caption.
//!
//! All passes are deterministic for a fixed config, and their output does
//! not depend on the size of the rayon thread pool.

mod audit;
mod config;
mod generate;
pub mod minhash;
mod pipeline;
mod stages;

use std::path::PathBuf;
use thiserror::Error;

pub use audit::{AuditEvent, AuditReason, CurationAudit, CurationStage};
pub use config::CurationConfig;
pub use generate::{assign_routes, stage3_generate, ReasoningClients, CAPTION_INSTRUCTION};
pub use pipeline::{run_pipeline, RefineClients};
pub use stages::{
    refine_triggers, stage1, stage1_dedup, stage1_judgment_filter, stage1_similarity_filter,
    stage2_refine, RefineTriggers,
};

use crate::clients::ClientError;
use crate::dataset::{DatasetError, GenerationRoute};
use crate::scoring::ScoreError;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("invalid curation config: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{source}")]
    Dataset {
        #[source]
        source: DatasetError,
        audit: Box<CurationAudit>,
    },
    #[error("surrogate scoring aborted curation: {source}")]
    Score {
        #[source]
        source: ScoreError,
        audit: Box<CurationAudit>,
    },
    #[error("{} generation: {source}", route.as_str())]
    Generation {
        route: GenerationRoute,
        #[source]
        source: ClientError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CurationError {
    pub fn partial_audit(&self) -> Option<&CurationAudit> {
        match self {
            CurationError::Dataset { audit, .. } | CurationError::Score { audit, .. } => Some(audit),
            _ => None,
        }
    }

    fn with_prior(self, prior: &CurationAudit) -> Self {
        match self {
            CurationError::Score { source, audit } => CurationError::Score {
                source,
                audit: Box::new(prior.clone().then(*audit)),
            },
            other => other,
        }
    }

    /// True when the failure stems from invalid input rather than the
    /// environment.
    pub fn is_validation(&self) -> bool {
        match self {
            CurationError::Config(_) | CurationError::Precondition(_) => true,
            CurationError::Dataset { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
