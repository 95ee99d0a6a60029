use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurationStage {
    Dedup,
    Similarity,
    Judgment,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AuditReason {
    Duplicate { of: String },
    Similar { of: String, estimate: f64 },
    EqualLabel,
    LowConfidence { confidence: f64 },
    Reoriented,
    RegeneratedLowScore { score: f64 },
    RegeneratedMinGap { gap: f64 },
    GenerationFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub id: String,
    pub stage: CurationStage,
    #[serde(flatten)]
    pub reason: AuditReason,
}

/// Counts and per-record events for one or more curation passes.
///
/// `input - removed_dedup - removed_similar - removed_judgment == output`;
/// refinement never changes the count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationAudit {
    pub input: usize,
    pub removed_dedup: usize,
    pub removed_similar: usize,
    pub removed_judgment: usize,
    /// Records whose chosen response fell below the low-score threshold.
    pub regenerated_low_score: usize,
    /// Records whose margin fell below the minimum gap.
    pub regenerated_min_gap: usize,
    /// Records actually rewritten (either trigger, generation succeeded).
    pub regenerated: usize,
    pub generation_failures: usize,
    pub output: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_low: Option<f64>,
    pub events: Vec<AuditEvent>,
}

impl CurationAudit {
    pub(crate) fn for_count(n: usize) -> Self {
        Self { input: n, output: n, ..Default::default() }
    }

    pub fn removed(&self) -> usize {
        self.removed_dedup + self.removed_similar + self.removed_judgment
    }

    /// Appends a later pass: counts accumulate, `output` follows the later
    /// pass.
    pub fn then(mut self, next: CurationAudit) -> Self {
        debug_assert_eq!(self.output, next.input);
        self.removed_dedup += next.removed_dedup;
        self.removed_similar += next.removed_similar;
        self.removed_judgment += next.removed_judgment;
        self.regenerated_low_score += next.regenerated_low_score;
        self.regenerated_min_gap += next.regenerated_min_gap;
        self.regenerated += next.regenerated;
        self.generation_failures += next.generation_failures;
        self.output = next.output;
        if next.tau_low.is_some() {
            self.tau_low = next.tau_low;
        }
        self.events.extend(next.events);
        self
    }

    pub fn is_balanced(&self) -> bool {
        self.input == self.output + self.removed()
    }
}
