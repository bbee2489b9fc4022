//! Feature extraction for end-of-training performance prediction.

use crate::domain::{HyperparameterConfig, SearchSpace, Trial};
use crate::error::{Error, Result};

/// The predictor input built from one trial observed to a given epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    /// Feature count for `hp_dim` dimensions and `epochs` observed epochs.
    pub fn expected_len(hp_dim: usize, epochs: usize) -> usize {
        hp_dim + 2 * epochs - 1
    }
}

/// Builds the feature vector of `trial` using its first `epochs` curve
/// values: normalized hyperparameters, then the curve prefix, then its
/// successive first differences.
///
/// The result has `hp_dim + 2 * epochs - 1` entries. Errors when the trial
/// has observed fewer than `epochs` values, when `epochs` is zero or
/// exceeds `target_epoch`, or when the configuration does not match the
/// space.
pub fn extract_features(
    trial: &Trial,
    epochs: usize,
    space: &SearchSpace,
    target_epoch: usize,
) -> Result<FeatureVector> {
    if trial.curve.len() < epochs {
        return Err(Error::Config(format!(
            "trial {} has {} observed epochs, {epochs} required",
            trial.id,
            trial.curve.len()
        )));
    }
    features_from_curve(
        &trial.config,
        &trial.curve.values,
        epochs,
        space,
        target_epoch,
    )
}

/// [`extract_features`] without the trial wrapper, for callers that hold a
/// configuration and a recorded curve prefix directly.
pub fn features_from_curve(
    config: &HyperparameterConfig,
    curve: &[f64],
    epochs: usize,
    space: &SearchSpace,
    target_epoch: usize,
) -> Result<FeatureVector> {
    if epochs == 0 || epochs > target_epoch {
        return Err(Error::Config(format!(
            "feature epoch {epochs} outside 1..={target_epoch}"
        )));
    }
    if curve.len() < epochs {
        return Err(Error::Config(format!(
            "curve has {} observed epochs, {epochs} required",
            curve.len()
        )));
    }
    if !space.contains(config) {
        return Err(Error::Config(
            "configuration does not match the search space".into(),
        ));
    }

    let mut features = Vec::with_capacity(FeatureVector::expected_len(space.len(), epochs));
    for (dim, value) in config.values.iter().enumerate() {
        features.push(space.normalize(dim, value));
    }
    let prefix = &curve[..epochs];
    features.extend_from_slice(prefix);
    features.extend(prefix.windows(2).map(|w| w[1] - w[0]));
    Ok(FeatureVector(features))
}
