use super::grad::PreferencePair;
use super::TrainError;
use crate::dataset::{FeatureStore, PreferenceLabel, PreferenceRecord};
use crate::model::{encode_input, ModelConfig};

/// Training pairs split by modality.
#[derive(Debug, Default)]
pub struct TrainingSet {
    pub multimodal: Vec<PreferencePair>,
    pub text: Vec<PreferencePair>,
    /// Records dropped because their judgment was `equal`.
    pub skipped_equal: usize,
}

/// Encodes records into training pairs. Equal-preference records are
/// skipped; `second_better` records are oriented so the preferred response
/// is first. Image references are resolved through `features`.
pub fn pairs_from_records(
    records: &[PreferenceRecord],
    config: &ModelConfig,
    features: &FeatureStore,
) -> Result<TrainingSet, TrainError> {
    let mut set = TrainingSet::default();
    for r in records {
        let (chosen, rejected) = match r.judgment.label {
            PreferenceLabel::Equal => {
                set.skipped_equal += 1;
                continue;
            }
            PreferenceLabel::FirstBetter => (&r.chosen, &r.rejected),
            PreferenceLabel::SecondBetter => (&r.rejected, &r.chosen),
        };
        let image = r.image_ref.as_deref().map(|i| features.load(i)).transpose()?;
        let enc = |resp: &str| {
            encode_input(config, &r.prompt, resp, image.as_deref())
                .map_err(|e| TrainError::Record { id: r.id.clone(), source: Box::new(e.into()) })
        };
        let pair = PreferencePair { chosen: enc(chosen)?, rejected: enc(rejected)? };
        if image.is_some() {
            set.multimodal.push(pair);
        } else {
            set.text.push(pair);
        }
    }
    Ok(set)
}
