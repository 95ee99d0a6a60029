use serde::{Deserialize, Serialize};
use std::fmt;

use super::canonical::canonicalize;
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    LlavaCritic,
    SkyworkText,
    RlaifV,
    Inhouse,
    Synthetic,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::LlavaCritic,
        Source::SkyworkText,
        Source::RlaifV,
        Source::Inhouse,
        Source::Synthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::LlavaCritic => "llava_critic",
            Source::SkyworkText => "skywork_text",
            Source::RlaifV => "rlaif_v",
            Source::Inhouse => "inhouse",
            Source::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Mathematics,
    Physics,
    Biology,
    Chemistry,
    Other,
}

impl DomainTag {
    pub const ALL: [DomainTag; 5] = [
        DomainTag::Mathematics,
        DomainTag::Physics,
        DomainTag::Biology,
        DomainTag::Chemistry,
        DomainTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::Mathematics => "mathematics",
            DomainTag::Physics => "physics",
            DomainTag::Biology => "biology",
            DomainTag::Chemistry => "chemistry",
            DomainTag::Other => "other",
        }
    }
}

/// How a reasoning-style response was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationRoute {
    Direct,
    TwoStep,
}

impl GenerationRoute {
    pub const ALL: [GenerationRoute; 2] = [GenerationRoute::Direct, GenerationRoute::TwoStep];

    pub fn as_str(self) -> &'static str {
        match self {
            GenerationRoute::Direct => "direct",
            GenerationRoute::TwoStep => "two_step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceLabel {
    FirstBetter,
    SecondBetter,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentMeta {
    pub label: PreferenceLabel,
    pub confidence: f64,
    pub judge: String,
}

/// One comparison: a prompt with a preferred (`chosen`) and a dispreferred
/// (`rejected`) response.
///
/// Field order here is the on-disk field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRecord {
    pub id: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<DomainTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<GenerationRoute>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub chosen: String,
    pub rejected: String,
    pub judgment: JudgmentMeta,
}

/// Record field that failed validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Id,
    DomainTag,
    Chosen,
    Confidence,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Id => "id",
            Field::DomainTag => "domain_tag",
            Field::Chosen => "chosen",
            Field::Confidence => "judgment.confidence",
        })
    }
}

impl PreferenceRecord {
    /// Checks the per-record invariants. Id uniqueness is a file-level
    /// property and is checked by the loaders and writers.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |field, message: &str| {
            Err(DatasetError::Validation {
                id: self.id.clone(),
                field,
                message: message.to_string(),
            })
        };
        if self.id.is_empty() {
            return fail(Field::Id, "id must be nonempty");
        }
        if self.domain_tag.is_some() && self.source != Source::Inhouse {
            return fail(Field::DomainTag, "domain_tag is only allowed on inhouse records");
        }
        let c = self.judgment.confidence;
        if !(0.0..=1.0).contains(&c) {
            return fail(Field::Confidence, "confidence must lie in [0, 1]");
        }
        if canonicalize(&self.chosen) == canonicalize(&self.rejected) {
            return fail(Field::Chosen, "chosen and rejected are identical after canonicalization");
        }
        Ok(())
    }

    pub fn has_image(&self) -> bool {
        self.image_ref.is_some()
    }
}

#[cfg(test)]
pub(crate) fn sample_record(id: &str) -> PreferenceRecord {
    PreferenceRecord {
        id: id.to_string(),
        source: Source::LlavaCritic,
        domain_tag: None,
        route: None,
        prompt: "What is in the image?".into(),
        image_ref: Some("img/0001.imgf".into()),
        chosen: "A red bicycle leaning on a wall.".into(),
        rejected: "A blue car.".into(),
        judgment: JudgmentMeta {
            label: PreferenceLabel::FirstBetter,
            confidence: 0.875,
            judge: "gpt-4o".into(),
        },
    }
}
