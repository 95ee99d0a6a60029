use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::{backward, FreezeSet, PreferencePair};
use super::optimizer::{adamw_step, AdamWConfig, OptimizerState};
use super::TrainError;
use crate::model::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFilter {
    MultimodalOnly,
    MultimodalPlusText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub stage_id: u8,
    pub learning_rate: f64,
    pub epochs: usize,
    pub data_filter: DataFilter,
    #[serde(default)]
    pub freeze: Vec<String>,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl StageConfig {
    /// Multimodal pairs only, learning rate 1e-5, two epochs.
    pub fn stage1() -> Self {
        Self {
            stage_id: 1,
            learning_rate: 1e-5,
            epochs: 2,
            data_filter: DataFilter::MultimodalOnly,
            freeze: Vec::new(),
            batch_size: 16,
            rng_seed: 1,
        }
    }

    /// Multimodal plus text-only pairs, learning rate 1e-6, two epochs.
    pub fn stage2() -> Self {
        Self {
            stage_id: 2,
            learning_rate: 1e-6,
            data_filter: DataFilter::MultimodalPlusText,
            rng_seed: 2,
            ..Self::stage1()
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(format!("stage {}: {m}", self.stage_id)));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        let expected = match self.stage_id {
            1 => DataFilter::MultimodalOnly,
            2 => DataFilter::MultimodalPlusText,
            id => return bad(format!("unknown stage id {id}")),
        };
        if self.data_filter != expected {
            return bad(format!("data_filter must be {expected:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub optimizer: AdamWConfig,
    /// Global gradient-norm clipping threshold.
    pub clip_norm: Option<f64>,
    /// Emit a checkpoint event every this many optimizer steps.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { optimizer: AdamWConfig::default(), clip_norm: Some(1.0), checkpoint_every: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    StageStart { stage: u8, learning_rate: f64, epochs: usize, examples: usize, frozen: Vec<String> },
    Step { step: usize, stage: u8, epoch: usize, loss: f64, accuracy: f64, grad_norm: f64, learning_rate: f64 },
    StageEnd { stage: u8, steps: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    /// Learning rate of each stage, in run order.
    pub fn stage_learning_rates(&self) -> Vec<(u8, f64)> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                LogEntry::StageStart { stage, learning_rate, .. } => Some((*stage, *learning_rate)),
                _ => None,
            })
            .collect()
    }

    pub fn steps(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| matches!(e, LogEntry::Step { .. }))
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        crate::dataset::to_jsonl_bytes(&self.entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointEvent {
    Step(usize),
    StageEnd(u8),
}

/// Runs the stages in order on `multimodal` and `text` pairs. Each stage
/// starts with fresh optimizer state and shuffles its data every epoch with
/// its own seed. `on_checkpoint` is called at every stage end and, if
/// configured, every `checkpoint_every` steps.
pub fn train_two_stage(
    init: Parameters,
    multimodal: &[PreferencePair],
    text: &[PreferencePair],
    stages: &[StageConfig],
    options: &TrainOptions,
    on_checkpoint: &mut dyn FnMut(CheckpointEvent, &Parameters) -> Result<(), TrainError>,
) -> Result<(Parameters, TrainLog), TrainError> {
    if stages.is_empty() {
        return Err(TrainError::Config("no stages configured".into()));
    }
    let mut data_sets = Vec::with_capacity(stages.len());
    for s in stages {
        s.validate()?;
        FreezeSet::new(&s.freeze).check(&init)?;
        let data: Vec<&PreferencePair> = match s.data_filter {
            DataFilter::MultimodalOnly => multimodal.iter().collect(),
            DataFilter::MultimodalPlusText => multimodal.iter().chain(text).collect(),
        };
        if data.is_empty() {
            return Err(TrainError::EmptyStage(s.stage_id));
        }
        data_sets.push(data);
    }

    let mut params = init;
    let mut log = TrainLog::default();
    let mut global_step = 0usize;
    for (stage, mut data) in stages.iter().zip(data_sets) {
        let frozen = FreezeSet::new(&stage.freeze);
        let mut state = OptimizerState::new(&params, &frozen, options.optimizer);
        let mut rng = ChaCha8Rng::seed_from_u64(stage.rng_seed);
        log.entries.push(LogEntry::StageStart {
            stage: stage.stage_id,
            learning_rate: stage.learning_rate,
            epochs: stage.epochs,
            examples: data.len(),
            frozen: frozen.groups().map(str::to_string).collect(),
        });
        let mut stage_steps = 0;
        for epoch in 0..stage.epochs {
            data.shuffle(&mut rng);
            for chunk in data.chunks(stage.batch_size) {
                let (mut grads, stats) = backward(&params, chunk, &frozen)?;
                let grad_norm = grads.global_norm();
                if let Some(max) = options.clip_norm {
                    if grad_norm > max {
                        grads.scale(max / grad_norm);
                    }
                }
                adamw_step(&mut params, &grads, &mut state, stage.learning_rate)?;
                global_step += 1;
                stage_steps += 1;
                log.entries.push(LogEntry::Step {
                    step: global_step,
                    stage: stage.stage_id,
                    epoch,
                    loss: stats.loss,
                    accuracy: stats.accuracy,
                    grad_norm,
                    learning_rate: stage.learning_rate,
                });
                if options.checkpoint_every.is_some_and(|n| n > 0 && global_step % n == 0) {
                    on_checkpoint(CheckpointEvent::Step(global_step), &params)?;
                }
            }
        }
        log.entries.push(LogEntry::StageEnd { stage: stage.stage_id, steps: stage_steps });
        on_checkpoint(CheckpointEvent::StageEnd(stage.stage_id), &params)?;
    }
    Ok((params, log))
}
