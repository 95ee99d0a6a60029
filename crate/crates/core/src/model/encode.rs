use super::tokenizer::{tokenize, BOS, EOS, SEP, VIS};
use super::{ModelConfig, ModelError};
use crate::dataset::ImageFeatures;

/// Model input laid out as
/// `[BOS] [VIS] * k_visual (if image) [prompt] [SEP] [response] [EOS]`.
///
/// Visual positions carry mean-pooled image feature groups instead of an
/// embedding lookup; the pooling is fixed, so the visual pathway below the
/// projector never changes during training.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    /// One pooled `d_img` vector per VIS position, in order.
    pub visual: Vec<Vec<f64>>,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn eos_position(&self) -> usize {
        self.ids.len() - 1
    }

    pub fn visual_positions(&self) -> std::ops::Range<usize> {
        1..1 + self.visual.len()
    }
}

/// Splits the `m` feature rows into `k` contiguous, nearly equal groups and
/// averages each group.
pub fn pool_features(features: &ImageFeatures, k: usize) -> Vec<Vec<f64>> {
    let m = features.m();
    (0..k)
        .map(|g| {
            let (lo, hi) = (g * m / k, (g + 1) * m / k);
            let mut acc = vec![0.0; features.d_img()];
            for i in lo..hi {
                for (a, &v) in acc.iter_mut().zip(features.row(i)) {
                    *a += v as f64;
                }
            }
            let n = (hi - lo) as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        })
        .collect()
}

pub fn encode_input(
    config: &ModelConfig,
    prompt: &str,
    response: &str,
    image: Option<&ImageFeatures>,
) -> Result<EncodedInput, ModelError> {
    let prompt_ids = tokenize(prompt);
    let response_ids = tokenize(response);
    let n_vis = if image.is_some() { config.k_visual } else { 0 };
    let len = 3 + n_vis + prompt_ids.len() + response_ids.len();
    if len > config.max_seq_len {
        return Err(ModelError::TooLong { len, max: config.max_seq_len });
    }
    let visual = match image {
        Some(f) => {
            if f.d_img() != config.d_img {
                return Err(ModelError::Shape(format!(
                    "image features have width {}, model expects {}",
                    f.d_img(),
                    config.d_img
                )));
            }
            if f.m() < config.k_visual {
                return Err(ModelError::Shape(format!(
                    "image has {} feature vectors, fewer than k_visual = {}",
                    f.m(),
                    config.k_visual
                )));
            }
            pool_features(f, config.k_visual)
        }
        None => Vec::new(),
    };
    let mut ids = Vec::with_capacity(len);
    ids.push(BOS);
    ids.extend(std::iter::repeat(VIS).take(n_vis));
    ids.extend(prompt_ids);
    ids.push(SEP);
    ids.extend(response_ids);
    ids.push(EOS);
    Ok(EncodedInput { ids, visual })
}
