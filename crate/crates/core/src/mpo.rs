//! Best-of-N preference pair construction: score every candidate response
//! for a prompt, pair the best with the worst, and keep the pair when the
//! score gap is at least `delta`.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    canonicalize, read_jsonl, write_records, DatasetError, JudgmentMeta, PreferenceLabel, PreferenceRecord,
    Source,
};
use crate::numeric::sigmoid;
use crate::scoring::{ScoreError, ScoreRequest, Scorer};

pub const DEFAULT_DELTA: f64 = 1.0;
pub const EXPORT_JUDGE: &str = "reward-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPair {
    pub prompt: String,
    pub image_ref: Option<String>,
    pub chosen: String,
    pub rejected: String,
    pub s_chosen: f64,
    pub s_rejected: f64,
    pub gap: f64,
}

#[derive(Debug, Error)]
pub enum MpoError {
    #[error("delta must be a positive finite number, got {0}")]
    InvalidDelta(f64),
    #[error("candidate set {index}: {message}")]
    InvalidSet { index: usize, message: String },
    #[error("candidate set {index}: {source}")]
    Score {
        index: usize,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl MpoError {
    pub fn is_validation(&self) -> bool {
        match self {
            MpoError::InvalidDelta(_) | MpoError::InvalidSet { .. } => true,
            MpoError::Score { .. } => false,
            MpoError::Dataset(e) => e.is_validation(),
        }
    }
}

impl CandidateSet {
    pub fn validate(&self) -> Result<(), String> {
        if self.candidates.is_empty() {
            return Err("no candidates".into());
        }
        let mut seen = HashSet::new();
        for (i, c) in self.candidates.iter().enumerate() {
            if !seen.insert(canonicalize(&c.response)) {
                return Err(format!("candidate {i} duplicates an earlier response"));
            }
        }
        Ok(())
    }
}

pub fn load_candidate_sets(path: &Path) -> Result<Vec<CandidateSet>, MpoError> {
    let rows: Vec<(usize, CandidateSet)> = read_jsonl(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(index, (line, set))| {
            set.validate()
                .map(|()| set)
                .map_err(|m| MpoError::InvalidSet { index, message: format!("line {line}: {m}") })
        })
        .collect()
}

fn check_delta(delta: f64) -> Result<(), MpoError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(MpoError::InvalidDelta(delta))
    }
}

/// Pairs the highest-scoring candidate with the lowest-scoring one. Ties
/// go to the lowest index. Returns `None` for fewer than two candidates or
/// a gap below `delta`. Any scoring failure is an error.
pub fn select_pair(scorer: &dyn Scorer, set: &CandidateSet, delta: f64) -> Result<Option<GeneratedPair>, ScoreError> {
    if set.candidates.len() < 2 {
        return Ok(None);
    }
    let mut scores = Vec::with_capacity(set.candidates.len());
    for c in &set.candidates {
        let s = scorer.score(&ScoreRequest {
            prompt: &set.prompt,
            image_ref: set.image_ref.as_deref(),
            response: &c.response,
        })?;
        if !s.is_finite() {
            return Err(ScoreError(format!("non-finite score {s}")));
        }
        scores.push(s);
    }
    let (mut hi, mut lo) = (0, 0);
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[hi] {
            hi = i;
        }
        if s < scores[lo] {
            lo = i;
        }
    }
    let gap = scores[hi] - scores[lo];
    if gap < delta || hi == lo {
        return Ok(None);
    }
    Ok(Some(GeneratedPair {
        prompt: set.prompt.clone(),
        image_ref: set.image_ref.clone(),
        chosen: set.candidates[hi].response.clone(),
        rejected: set.candidates[lo].response.clone(),
        s_chosen: scores[hi],
        s_rejected: scores[lo],
        gap,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub candidate_sets: usize,
    pub pairs: usize,
    pub below_delta: usize,
    pub too_few_candidates: usize,
}

/// Runs [`select_pair`] over every set concurrently; pairs come back in
/// input order.
pub fn generate_pairs(
    scorer: &dyn Scorer,
    sets: &[CandidateSet],
    delta: f64,
) -> Result<(Vec<GeneratedPair>, GenerationSummary), MpoError> {
    check_delta(delta)?;
    let results: Vec<Option<GeneratedPair>> = sets
        .par_iter()
        .enumerate()
        .map(|(index, set)| {
            set.validate().map_err(|message| MpoError::InvalidSet { index, message })?;
            select_pair(scorer, set, delta).map_err(|source| MpoError::Score { index, source })
        })
        .collect::<Result<_, _>>()?;
    let mut summary = GenerationSummary { candidate_sets: sets.len(), ..Default::default() };
    let mut pairs = Vec::new();
    for (set, r) in sets.iter().zip(results) {
        match r {
            Some(p) => pairs.push(p),
            None if set.candidates.len() < 2 => summary.too_few_candidates += 1,
            None => summary.below_delta += 1,
        }
    }
    summary.pairs = pairs.len();
    Ok((pairs, summary))
}

/// Converts pairs to dataset records: source `synthetic`, label
/// `first_better`, confidence `sigmoid(gap)`, ids `mpo-000000`, ...
pub fn pairs_to_records(pairs: &[GeneratedPair]) -> Vec<PreferenceRecord> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| PreferenceRecord {
            id: format!("mpo-{i:06}"),
            source: Source::Synthetic,
            domain_tag: None,
            route: None,
            prompt: p.prompt.clone(),
            image_ref: p.image_ref.clone(),
            chosen: p.chosen.clone(),
            rejected: p.rejected.clone(),
            judgment: JudgmentMeta {
                label: PreferenceLabel::FirstBetter,
                confidence: sigmoid(p.gap),
                judge: EXPORT_JUDGE.into(),
            },
        })
        .collect()
}

pub fn export_pairs(pairs: &[GeneratedPair], path: &Path) -> Result<(), MpoError> {
    Ok(write_records(&pairs_to_records(pairs), path)?)
}
