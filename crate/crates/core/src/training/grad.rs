use rayon::prelude::*;
use std::borrow::Borrow;
use std::collections::BTreeSet;

use super::loss::{loss_score_gradients, pairwise_loss};
use super::TrainError;
use crate::model::transformer::{backward as model_backward, forward_cached};
use crate::model::{forward, group_of, EncodedInput, Parameters, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub chosen: EncodedInput,
    pub rejected: EncodedInput,
}

/// Names of parameter groups excluded from gradients and updates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreezeSet(BTreeSet<String>);

impl FreezeSet {
    pub fn new<I, S>(groups: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(groups.into_iter().map(Into::into).collect())
    }

    pub fn is_frozen(&self, tensor_name: &str) -> bool {
        self.0.contains(group_of(tensor_name))
    }

    pub fn groups(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Fails if a named group does not exist in `params`.
    pub fn check(&self, params: &Parameters) -> Result<(), TrainError> {
        let known = params.group_names();
        for g in &self.0 {
            if !known.contains(g) {
                return Err(TrainError::Config(format!(
                    "unknown parameter group {g:?} in freeze set (known: {})",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Gradients of the mean batch loss for trainable tensors only.
#[derive(Debug, Clone)]
pub struct Gradients {
    entries: Vec<(String, Tensor)>,
}

impl Gradients {
    fn from_full(full: Parameters, frozen: &FreezeSet) -> Self {
        let entries = full
            .named()
            .into_iter()
            .filter(|(n, _)| !frozen.is_frozen(n))
            .map(|(n, t)| (n, t.clone()))
            .collect();
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn global_norm(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|(_, t)| &t.data)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in &mut self.entries {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub loss: f64,
    /// Fraction of pairs with `s_chosen > s_rejected`.
    pub accuracy: f64,
}

/// Mean pairwise loss over the batch.
pub fn batch_loss(params: &Parameters, batch: &[PreferencePair]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for p in batch {
        total += pairwise_loss(forward(params, &p.chosen)?, forward(params, &p.rejected)?)?;
    }
    Ok(total / batch.len() as f64)
}

/// Reverse-mode gradients of the mean batch loss. Per-pair gradients are
/// computed in parallel and summed in batch order, so the result does not
/// depend on the thread count.
pub fn backward<P: Borrow<PreferencePair> + Sync>(
    params: &Parameters,
    batch: &[P],
    frozen: &FreezeSet,
) -> Result<(Gradients, BatchStats), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let per_pair: Vec<(Parameters, f64, bool)> = batch
        .par_iter()
        .map(|pair| -> Result<_, TrainError> {
            let pair = pair.borrow();
            let (s_plus, c_plus) = forward_cached(params, &pair.chosen)?;
            let (s_minus, c_minus) = forward_cached(params, &pair.rejected)?;
            let loss = pairwise_loss(s_plus, s_minus)?;
            let (g_plus, g_minus) = loss_score_gradients(s_plus, s_minus);
            let mut grad = params.zeros_like();
            model_backward(params, &pair.chosen, &c_plus, g_plus * scale, &mut grad);
            model_backward(params, &pair.rejected, &c_minus, g_minus * scale, &mut grad);
            Ok((grad, loss, s_plus > s_minus))
        })
        .collect::<Result<_, _>>()?;

    let mut iter = per_pair.into_iter();
    let (mut total, mut loss, first_ok) = iter.next().expect("nonempty batch");
    let mut correct = first_ok as usize;
    for (g, l, ok) in iter {
        total.add_assign(&g);
        loss += l;
        correct += ok as usize;
    }
    let grads = Gradients::from_full(total, frozen);
    for (name, t) in grads.iter() {
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite(format!("gradient of group {}", group_of(name))));
        }
    }
    let stats = BatchStats { loss: loss * scale, accuracy: correct as f64 * scale };
    Ok((grads, stats))
}
