//! Focal loss, class-weighted focal loss, and class-frequency weights.
//!
//! The weighting factor for class c is the inverse ratio of its sample count
//! to the total; optionally rescaled so the mean weight is 1, which keeps the
//! weighted loss on the same magnitude as the unweighted one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClsLossError {
    #[error("p_t = {0} is outside (0, 1]; focal loss needs a positive true-class probability")]
    InvalidProbability(f64),
    #[error("weighted focal loss requires class_weights in FocalParams")]
    MissingClassWeights,
    #[error("class index {0} out of range for {1} class weights")]
    ClassOutOfRange(usize, usize),
    #[error("class {name:?} has zero instances; merge it into another class or drop it before deriving weights")]
    ZeroCountClass { name: String },
    #[error("histogram is empty; weights need at least one class with instances")]
    EmptyHistogram,
    #[error("invalid focal parameters: {0}")]
    InvalidParams(String),
}

/// The 15 aerial categories in report column order.
pub const ISAID_CLASS_NAMES: [&str; 15] = [
    "ship",
    "storage_tank",
    "tennis_court",
    "baseball_diamond",
    "basketball_court",
    "ground_track_field",
    "bridge",
    "large_vehicle",
    "small_vehicle",
    "helicopter",
    "swimming_pool",
    "roundabout",
    "soccer_ball_field",
    "plane",
    "harbor",
];

/// Per-class instance counts with ordered labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub class_names: Vec<String>,
    pub counts: Vec<u64>,
}

impl ClassHistogram {
    pub fn new(class_names: Vec<String>, counts: Vec<u64>) -> Self {
        assert_eq!(
            class_names.len(),
            counts.len(),
            "one count per class name"
        );
        Self {
            class_names,
            counts,
        }
    }

    /// Empty histogram over the default 15 aerial categories.
    pub fn isaid() -> Self {
        Self {
            class_names: ISAID_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            counts: vec![0; ISAID_CLASS_NAMES.len()],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Focal loss parameters: balance scalar α, focusing exponent γ, and optional
/// per-class weights for the weighted variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
            class_weights: None,
        }
    }
}

impl FocalParams {
    pub fn validate(&self) -> Result<(), ClsLossError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ClsLossError::InvalidParams(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.gamma < 0.0 {
            return Err(ClsLossError::InvalidParams(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if let Some(ws) = &self.class_weights {
            if ws.iter().any(|&w| w <= 0.0) {
                return Err(ClsLossError::InvalidParams(
                    "class weights must all be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// −α(1−p_t)^γ · log(p_t). With γ = 0 and α = 1 this is cross-entropy.
pub fn focal_loss(p_t: f64, params: &FocalParams) -> Result<f64, ClsLossError> {
    if !(p_t > 0.0 && p_t <= 1.0) {
        return Err(ClsLossError::InvalidProbability(p_t));
    }
    Ok(-params.alpha * (1.0 - p_t).powf(params.gamma) * p_t.ln())
}

/// d/dp_t of [`focal_loss`], for gradient checking.
pub fn focal_loss_derivative(p_t: f64, params: &FocalParams) -> Result<f64, ClsLossError> {
    if !(p_t > 0.0 && p_t <= 1.0) {
        return Err(ClsLossError::InvalidProbability(p_t));
    }
    let one_minus = 1.0 - p_t;
    // d/dp [−α(1−p)^γ ln p] = α·γ(1−p)^{γ−1} ln p − α(1−p)^γ / p
    let term_log = if params.gamma == 0.0 {
        0.0
    } else {
        params.alpha * params.gamma * one_minus.powf(params.gamma - 1.0) * p_t.ln()
    };
    Ok(term_log - params.alpha * one_minus.powf(params.gamma) / p_t)
}

/// w_c · focal_loss(p_t): the per-class weight scales the focal term.
pub fn weighted_focal_loss(
    p_t: f64,
    class_id: usize,
    params: &FocalParams,
) -> Result<f64, ClsLossError> {
    let weights = params
        .class_weights
        .as_ref()
        .ok_or(ClsLossError::MissingClassWeights)?;
    let w = *weights
        .get(class_id)
        .ok_or(ClsLossError::ClassOutOfRange(class_id, weights.len()))?;
    Ok(w * focal_loss(p_t, params)?)
}

/// Inverse-frequency class weights w_c = total / count_c.
///
/// With `normalize` the weights are rescaled to mean 1 so the weighted loss
/// stays comparable to the unweighted focal loss.
pub fn class_weights_from_histogram(
    hist: &ClassHistogram,
    normalize: bool,
) -> Result<Vec<f64>, ClsLossError> {
    if hist.counts.is_empty() || hist.total() == 0 {
        return Err(ClsLossError::EmptyHistogram);
    }
    if let Some(idx) = hist.counts.iter().position(|&c| c == 0) {
        return Err(ClsLossError::ZeroCountClass {
            name: hist
                .class_names
                .get(idx)
                .cloned()
                .unwrap_or_else(|| format!("#{idx}")),
        });
    }
    let total = hist.total() as f64;
    let mut weights: Vec<f64> = hist.counts.iter().map(|&c| total / c as f64).collect();
    if normalize {
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w /= mean);
    }
    Ok(weights)
}

/// Arithmetic mean of per-sample focal losses; the batch reduction used
/// everywhere in the crate.
pub fn focal_loss_batch(
    samples: &[(f64, usize)],
    params: &FocalParams,
    weighted: bool,
) -> Result<f64, ClsLossError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for &(p_t, class_id) in samples {
        sum += if weighted {
            weighted_focal_loss(p_t, class_id, params)?
        } else {
            focal_loss(p_t, params)?
        };
    }
    Ok(sum / samples.len() as f64)
}
