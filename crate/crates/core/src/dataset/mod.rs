//! Preference records, image-feature files, and corpus statistics.

mod canonical;
mod features;
mod fingerprint;
mod io;
mod mixture;
mod record;

use std::path::{Path, PathBuf};
use thiserror::Error;

pub use canonical::canonicalize;
pub use features::{FeatureStore, ImageFeatures};
pub use fingerprint::{fingerprint, fingerprint_with_image, Digest128};
pub use io::{load_records, read_jsonl, to_jsonl_bytes, write_jsonl, write_records};
pub use mixture::{mixture_report, MixtureReport, Share, ShareGroup};
pub use record::{
    DomainTag, Field, GenerationRoute, JudgmentMeta, PreferenceLabel, PreferenceRecord, Source,
};

#[cfg(test)]
pub(crate) use record::sample_record;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("record {id:?}: invalid {field}: {message}")]
    Validation { id: String, field: Field, message: String },
    #[error("line {line}: {inner}")]
    AtLine {
        line: usize,
        #[source]
        inner: Box<DatasetError>,
    },
    #[error("image features: {0}")]
    Features(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn at_line(self, line: usize) -> Self {
        DatasetError::AtLine { line, inner: Box::new(self) }
    }

    /// True for malformed or invalid content, false for environment (IO)
    /// failures.
    pub fn is_validation(&self) -> bool {
        match self {
            DatasetError::Io { .. } => false,
            DatasetError::AtLine { inner, .. } => inner.is_validation(),
            _ => true,
        }
    }
}
