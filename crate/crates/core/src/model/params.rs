use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    /// `[d_model, 3 * d_model]`, columns ordered q | k | v.
    pub qkv_weight: Tensor,
    pub qkv_bias: Tensor,
    pub out_weight: Tensor,
    pub out_bias: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub ff1_weight: Tensor,
    pub ff1_bias: Tensor,
    pub ff2_weight: Tensor,
    pub ff2_bias: Tensor,
}

/// All model weights, grouped for freezing as `embed`, `projector`,
/// `blocks.<i>`, `final_norm` and `reward_head`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub config: ModelConfig,
    pub token_embedding: Tensor,
    pub position_embedding: Tensor,
    /// `[d_img, d_model]`.
    pub projector_weight: Tensor,
    pub projector_bias: Tensor,
    pub blocks: Vec<Block>,
    pub final_gain: Tensor,
    pub final_bias: Tensor,
    /// `[d_model]`.
    pub head_weight: Tensor,
    /// `[1]`.
    pub head_bias: Tensor,
}

pub const GROUP_EMBED: &str = "embed";
pub const GROUP_PROJECTOR: &str = "projector";
pub const GROUP_FINAL_NORM: &str = "final_norm";
pub const GROUP_REWARD_HEAD: &str = "reward_head";

/// Parameter group a tensor name belongs to.
pub fn group_of(name: &str) -> &str {
    if let Some(rest) = name.strip_prefix("blocks.") {
        let idx_len = rest.find('.').unwrap_or(rest.len());
        &name[..7 + idx_len]
    } else {
        name.split('.').next().unwrap_or(name)
    }
}

/// Whether AdamW applies weight decay to a tensor: matrices and the reward
/// head weight do, norms and biases do not.
pub fn decays(name: &str, tensor: &Tensor) -> bool {
    tensor.shape.len() == 2 || name == "reward_head.weight"
}

impl Block {
    fn zeros(c: &ModelConfig) -> Self {
        let d = c.d_model;
        Self {
            ln1_gain: Tensor::filled(&[d], 1.0),
            ln1_bias: Tensor::zeros(&[d]),
            qkv_weight: Tensor::zeros(&[d, 3 * d]),
            qkv_bias: Tensor::zeros(&[3 * d]),
            out_weight: Tensor::zeros(&[d, d]),
            out_bias: Tensor::zeros(&[d]),
            ln2_gain: Tensor::filled(&[d], 1.0),
            ln2_bias: Tensor::zeros(&[d]),
            ff1_weight: Tensor::zeros(&[d, c.d_ff]),
            ff1_bias: Tensor::zeros(&[c.d_ff]),
            ff2_weight: Tensor::zeros(&[c.d_ff, d]),
            ff2_bias: Tensor::zeros(&[d]),
        }
    }

    fn named(&self) -> [(&'static str, &Tensor); 12] {
        [
            ("ln1.gain", &self.ln1_gain),
            ("ln1.bias", &self.ln1_bias),
            ("attn.qkv.weight", &self.qkv_weight),
            ("attn.qkv.bias", &self.qkv_bias),
            ("attn.out.weight", &self.out_weight),
            ("attn.out.bias", &self.out_bias),
            ("ln2.gain", &self.ln2_gain),
            ("ln2.bias", &self.ln2_bias),
            ("ff.in.weight", &self.ff1_weight),
            ("ff.in.bias", &self.ff1_bias),
            ("ff.out.weight", &self.ff2_weight),
            ("ff.out.bias", &self.ff2_bias),
        ]
    }

    fn named_mut(&mut self) -> [(&'static str, &mut Tensor); 12] {
        [
            ("ln1.gain", &mut self.ln1_gain),
            ("ln1.bias", &mut self.ln1_bias),
            ("attn.qkv.weight", &mut self.qkv_weight),
            ("attn.qkv.bias", &mut self.qkv_bias),
            ("attn.out.weight", &mut self.out_weight),
            ("attn.out.bias", &mut self.out_bias),
            ("ln2.gain", &mut self.ln2_gain),
            ("ln2.bias", &mut self.ln2_bias),
            ("ff.in.weight", &mut self.ff1_weight),
            ("ff.in.bias", &mut self.ff1_bias),
            ("ff.out.weight", &mut self.ff2_weight),
            ("ff.out.bias", &mut self.ff2_bias),
        ]
    }
}

impl Parameters {
    /// Correctly shaped parameters with unit norm gains and every other
    /// entry zero. Also serves as a gradient accumulator.
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        Self {
            config: config.clone(),
            token_embedding: Tensor::zeros(&[config.vocab_size, d]),
            position_embedding: Tensor::zeros(&[config.max_seq_len, d]),
            projector_weight: Tensor::zeros(&[config.d_img, d]),
            projector_bias: Tensor::zeros(&[d]),
            blocks: (0..config.n_layers).map(|_| Block::zeros(config)).collect(),
            final_gain: Tensor::filled(&[d], 1.0),
            final_bias: Tensor::zeros(&[d]),
            head_weight: Tensor::zeros(&[d]),
            head_bias: Tensor::zeros(&[1]),
        }
    }

    /// Same shapes, all zeros (including norm gains).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.data.iter_mut().for_each(|v| *v = 0.0));
        z
    }

    /// Tensors in canonical order with their fully qualified names.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("embed.token".into(), &self.token_embedding),
            ("embed.position".into(), &self.position_embedding),
            ("projector.weight".into(), &self.projector_weight),
            ("projector.bias".into(), &self.projector_bias),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.named().into_iter().map(|(n, t)| (format!("blocks.{i}.{n}"), t)));
        }
        out.push(("final_norm.gain".into(), &self.final_gain));
        out.push(("final_norm.bias".into(), &self.final_bias));
        out.push(("reward_head.weight".into(), &self.head_weight));
        out.push(("reward_head.bias".into(), &self.head_bias));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("embed.token".into(), &mut self.token_embedding),
            ("embed.position".into(), &mut self.position_embedding),
            ("projector.weight".into(), &mut self.projector_weight),
            ("projector.bias".into(), &mut self.projector_bias),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.extend(b.named_mut().into_iter().map(|(n, t)| (format!("blocks.{i}.{n}"), t)));
        }
        out.push(("final_norm.gain".into(), &mut self.final_gain));
        out.push(("final_norm.bias".into(), &mut self.final_bias));
        out.push(("reward_head.weight".into(), &mut self.head_weight));
        out.push(("reward_head.bias".into(), &mut self.head_bias));
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor)) {
        for (name, t) in self.named_mut() {
            f(&name, t);
        }
    }

    pub fn group_names(&self) -> Vec<String> {
        let mut groups: Vec<String> = Vec::new();
        for (name, _) in self.named() {
            let g = group_of(&name);
            if groups.last().map(String::as_str) != Some(g) {
                groups.push(g.to_string());
            }
        }
        groups
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Parameters) {
        let others = other.named();
        for ((_, t), (_, o)) in self.named_mut().into_iter().zip(others) {
            t.data.iter_mut().zip(&o.data).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_mut(|_, t| t.data.iter_mut().for_each(|v| *v *= factor));
    }
}

/// Seeded initialization: N(0, 0.02) for every matrix, zeros for biases,
/// unit norm gains, and an all-zero reward head so a fresh model scores
/// every input as exactly 0.
pub fn init_parameters(config: &ModelConfig) -> Parameters {
    let mut p = Parameters::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let normal = Normal::new(0.0, 0.02).expect("valid std");
    p.for_each_mut(|name, t| {
        if t.shape.len() == 2 && !name.starts_with("reward_head") {
            t.data.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        }
    });
    p
}
