//! Response warping: `log(1 + count)` followed by centering on the training mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("count at index {index} is negative or not finite ({value})")]
    NegativeCount { index: usize, value: f64 },
    #[error("cannot fit a transform on zero counts")]
    Empty,
}

/// Centering statistic learned from the training counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformState {
    pub center: f64,
}

fn log1p_checked(counts: &[f64]) -> Result<Vec<f64>, TransformError> {
    counts
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value >= 0.0 && value.is_finite() {
                Ok(value.ln_1p())
            } else {
                Err(TransformError::NegativeCount { index, value })
            }
        })
        .collect()
}

pub fn forward(counts: &[f64]) -> Result<(Vec<f64>, TransformState), TransformError> {
    if counts.is_empty() {
        return Err(TransformError::Empty);
    }
    let logs = log1p_checked(counts)?;
    let center = logs.iter().sum::<f64>() / logs.len() as f64;
    let transformed = logs.into_iter().map(|v| v - center).collect();
    Ok((transformed, TransformState { center }))
}

/// Transforms new counts with an existing training center.
pub fn apply(counts: &[f64], state: &TransformState) -> Result<Vec<f64>, TransformError> {
    Ok(log1p_checked(counts)?
        .into_iter()
        .map(|v| v - state.center)
        .collect())
}

/// Plug-in back-transform to counts: `max(0, exp(v + center) − 1)`.
///
/// Applied to a predictive mean this yields the count-scale median, not the
/// lognormal mean.
pub fn inverse(values: &[f64], state: &TransformState) -> Vec<f64> {
    values.iter().map(|&v| inverse_one(v, state)).collect()
}

pub fn inverse_one(value: f64, state: &TransformState) -> f64 {
    (value + state.center).exp_m1().max(0.0)
}
