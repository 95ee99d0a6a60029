use serde::{Deserialize, Serialize};

use super::grad::{FreezeSet, Gradients};
use super::TrainError;
use crate::model::{decays, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    name: String,
    shape: Vec<usize>,
    decay: bool,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// AdamW moment accumulators for the trainable tensors of a model.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    step: u64,
    moments: Vec<Moments>,
}

impl OptimizerState {
    pub fn new(params: &Parameters, frozen: &FreezeSet, config: AdamWConfig) -> Self {
        let moments = params
            .named()
            .into_iter()
            .filter(|(n, _)| !frozen.is_frozen(n))
            .map(|(n, t)| Moments {
                decay: decays(&n, t),
                name: n,
                shape: t.shape.clone(),
                m: vec![0.0; t.len()],
                v: vec![0.0; t.len()],
            })
            .collect();
        Self { config, step: 0, moments }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn tracked(&self) -> impl Iterator<Item = &str> {
        self.moments.iter().map(|m| m.name.as_str())
    }
}

/// One decoupled-weight-decay Adam update with bias correction:
///
/// ```text
/// p <- p * (1 - lr * wd)                      (decaying tensors only)
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
///
/// Only tensors tracked by `state` are touched.
pub fn adamw_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<(), TrainError> {
    let tracked: Vec<&str> = state.tracked().collect();
    let given: Vec<&str> = grads.iter().map(|(n, _)| n).collect();
    if tracked != given {
        return Err(TrainError::Shape(format!(
            "gradient tensors {given:?} do not match optimizer state {tracked:?}"
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let AdamWConfig { beta1, beta2, eps, weight_decay } = state.config;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    let mut slots = params.named_mut();
    for (mom, (name, g)) in state.moments.iter_mut().zip(grads.iter()) {
        let (_, p) = slots
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| TrainError::Shape(format!("no parameter named {name}")))?;
        if p.shape != mom.shape || g.shape != mom.shape {
            return Err(TrainError::Shape(format!(
                "{name}: parameter {:?}, gradient {:?}, state {:?}",
                p.shape, g.shape, mom.shape
            )));
        }
        let shrink = if mom.decay { 1.0 - lr * weight_decay } else { 1.0 };
        for i in 0..p.data.len() {
            let gi = g.data[i];
            mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * gi;
            mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = mom.m[i] / bc1;
            let v_hat = mom.v[i] / bc2;
            p.data[i] = p.data[i] * shrink - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
