//! The scoring abstraction shared by curation, evaluation and pair
//! generation.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

use crate::dataset::{canonicalize, read_jsonl, DatasetError};

#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub prompt: &'a str,
    pub image_ref: Option<&'a str>,
    pub response: &'a str,
}

#[derive(Debug, Error)]
#[error("scoring failed: {0}")]
pub struct ScoreError(pub String);

/// Maps (prompt, image?, response) to a real-valued reward.
pub trait Scorer: Send + Sync {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError>;
}

impl<F> Scorer for F
where
    F: Fn(&ScoreRequest<'_>) -> Result<f64, ScoreError> + Send + Sync,
{
    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        self(request)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreEntry {
    #[serde(default)]
    pub prompt: Option<String>,
    pub response: String,
    pub score: f64,
}

/// Scorer backed by a lookup table of planted scores. Entries with a prompt
/// match only that prompt; entries without one match any prompt. Lookups
/// compare canonicalized text. A missing entry is a scoring failure.
#[derive(Debug, Default, Clone)]
pub struct ScoreTable {
    by_pair: HashMap<(String, String), f64>,
    by_response: HashMap<String, f64>,
}

impl ScoreTable {
    pub fn new(entries: impl IntoIterator<Item = ScoreEntry>) -> Self {
        let mut t = Self::default();
        for e in entries {
            let resp = canonicalize(&e.response);
            match e.prompt {
                Some(p) => {
                    t.by_pair.insert((canonicalize(&p), resp), e.score);
                }
                None => {
                    t.by_response.insert(resp, e.score);
                }
            }
        }
        t
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let rows: Vec<(usize, ScoreEntry)> = read_jsonl(path)?;
        Ok(Self::new(rows.into_iter().map(|(_, e)| e)))
    }
}

impl Scorer for ScoreTable {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let resp = canonicalize(request.response);
        let key = (canonicalize(request.prompt), resp);
        self.by_pair
            .get(&key)
            .or_else(|| self.by_response.get(&key.1))
            .copied()
            .ok_or_else(|| ScoreError(format!("no planted score for response {:?}", request.response)))
    }
}
