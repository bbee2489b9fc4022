//! Prediction quality measurement.

use crate::error::{Error, Result};

/// Paired true values and predictions, ready for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEval {
    /// Observed values.
    pub truths: Vec<f64>,
    /// Predicted values, aligned with `truths`.
    pub predictions: Vec<f64>,
}

impl PredictionEval {
    /// Pairs up truths and predictions; both must be finite, equally long
    /// and contain at least two entries.
    pub fn new(truths: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        if truths.len() != predictions.len() {
            return Err(Error::Numeric(format!(
                "{} truths vs {} predictions",
                truths.len(),
                predictions.len()
            )));
        }
        if truths.len() < 2 {
            return Err(Error::Numeric(
                "need at least two points to score predictions".into(),
            ));
        }
        if let Some(bad) = truths
            .iter()
            .chain(predictions.iter())
            .find(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(*bad));
        }
        Ok(PredictionEval {
            truths,
            predictions,
        })
    }

    /// Coefficient of determination of the predictions.
    pub fn r_squared(&self) -> Result<f64> {
        r_squared(&self.truths, &self.predictions)
    }
}

/// Coefficient of determination
/// `R² = 1 - Σ(yᵢ - fᵢ)² / Σ(yᵢ - ȳ)²`.
///
/// `1` means an exact fit and `0` the skill of always predicting the mean;
/// values below `0` are possible for predictors worse than that. Errors on
/// zero-variance truths, where the ratio is undefined.
pub fn r_squared(truths: &[f64], predictions: &[f64]) -> Result<f64> {
    if truths.len() != predictions.len() || truths.len() < 2 {
        return Err(Error::Numeric(
            "r_squared needs two equally long value lists with >= 2 entries".into(),
        ));
    }
    if let Some(bad) = truths
        .iter()
        .chain(predictions.iter())
        .find(|v| !v.is_finite())
    {
        return Err(Error::NonFinite(*bad));
    }
    let mean = truths.iter().sum::<f64>() / truths.len() as f64;
    let sst: f64 = truths.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::Numeric(
            "truths have zero variance, r_squared undefined".into(),
        ));
    }
    let sse: f64 = truths
        .iter()
        .zip(predictions)
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    Ok(1.0 - sse / sst)
}
