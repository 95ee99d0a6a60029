use super::TrainError;
use crate::numeric::{sigmoid, softplus};

/// Pairwise ranking loss `-ln sigmoid(s_plus - s_minus)`, evaluated as
/// `softplus(-(s_plus - s_minus))`.
pub fn pairwise_loss(s_plus: f64, s_minus: f64) -> Result<f64, TrainError> {
    if !s_plus.is_finite() || !s_minus.is_finite() {
        return Err(TrainError::NonFinite("pairwise loss input".into()));
    }
    Ok(softplus(-(s_plus - s_minus)))
}

/// `(dL/ds_plus, dL/ds_minus) = (sigmoid(delta) - 1, 1 - sigmoid(delta))`.
pub fn loss_score_gradients(s_plus: f64, s_minus: f64) -> (f64, f64) {
    // sigmoid(delta) - 1 == -sigmoid(-delta), which keeps precision for large delta.
    let g = sigmoid(-(s_plus - s_minus));
    (-g, g)
}
