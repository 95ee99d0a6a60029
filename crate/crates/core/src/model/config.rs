use serde::{Deserialize, Serialize};

use super::tokenizer::VOCAB_SIZE;
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    /// Width of the precomputed image feature vectors.
    pub d_img: usize,
    /// Visual tokens produced per image.
    pub k_visual: usize,
    pub rng_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: VOCAB_SIZE,
            d_model: 32,
            n_layers: 2,
            n_heads: 4,
            d_ff: 64,
            max_seq_len: 512,
            d_img: 16,
            k_visual: 4,
            rng_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.vocab_size != VOCAB_SIZE {
            return bad(format!("vocab_size must be {VOCAB_SIZE} for the byte-level tokenizer"));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model ({}) must be a positive multiple of n_heads ({})",
                self.d_model, self.n_heads
            ));
        }
        if self.d_ff == 0 || self.d_img == 0 || self.k_visual == 0 {
            return bad("d_ff, d_img and k_visual must be positive".into());
        }
        // BOS, SEP, EOS plus the visual block must fit.
        if self.max_seq_len < self.k_visual + 3 {
            return bad(format!(
                "max_seq_len ({}) cannot hold {} visual tokens plus BOS/SEP/EOS",
                self.max_seq_len, self.k_visual
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}
