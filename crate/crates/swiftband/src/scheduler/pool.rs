//! On-the-fly predictor training shared by the scheduler variants.
//!
//! The pool watches every trial's curve grow and trains one regressor per
//! `(round-end epoch, feature epoch)` key: the samples are all observed
//! trials whose curves reach the round-end epoch, with features taken at the
//! feature epoch and the target taken at the round end. Keys are shared
//! across brackets, which maximizes scarce training data early in a search.
//!
//! A key yields a model only once it has `min_samples` samples, and an
//! existing model is retrained when its sample count has grown by 25%.
//! Training failures and missing models degrade to "no prediction" — the
//! schedulers treat that as "let the trial live", never as an error.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{HyperparameterConfig, SearchSpace, Trial, TrialId};
use crate::predictor::features::features_from_curve;
use crate::predictor::qubo::{train_qsvr, QsvrParams};
use crate::predictor::svr::{loocv_std, train_svr, SvrModel, SvrParams};

/// Which regressor the pool trains, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// ε-SVR trained by pairwise dual ascent.
    Svr,
    /// The same regressor trained by annealing the QUBO dual encoding.
    Qsvr,
    /// Test hook: predictions are the recorded true values.
    Oracle,
    /// No predictions; schedulers fall back to plain round-end elimination.
    Disabled,
}

/// One trial's contribution to future training sets: its configuration and
/// the curve prefix observed so far.
struct Observation {
    config: HyperparameterConfig,
    curve: Vec<f64>,
}

struct TrainedEntry {
    model: SvrModel,
    trained_on: usize,
    /// Leave-one-out residual spread, computed on demand and cached.
    sigma: Option<f64>,
}

/// Keyed store of performance predictors trained during a run.
pub struct PredictorPool {
    kind: PredictorKind,
    min_samples: usize,
    svr: SvrParams,
    qsvr: QsvrParams,
    seed: u64,
    target_epoch: u32,
    observations: Vec<Observation>,
    index_of: HashMap<TrialId, usize>,
    models: HashMap<(u32, u32), TrainedEntry>,
}

impl PredictorPool {
    pub fn new(
        kind: PredictorKind,
        min_samples: usize,
        svr: SvrParams,
        qsvr: QsvrParams,
        seed: u64,
        target_epoch: u32,
    ) -> Self {
        PredictorPool {
            kind,
            min_samples,
            svr,
            qsvr,
            seed,
            target_epoch,
            observations: Vec::new(),
            index_of: HashMap::new(),
            models: HashMap::new(),
        }
    }

    /// Records (or refreshes) what is known about a trial. Call whenever a
    /// trial's curve has grown; partial curves are useful training data for
    /// every key they reach.
    pub fn observe(&mut self, trial: &Trial) {
        match self.index_of.get(&trial.id) {
            Some(&i) => {
                if trial.curve.values.len() > self.observations[i].curve.len() {
                    self.observations[i].curve = trial.curve.values.clone();
                }
            }
            None => {
                self.index_of.insert(trial.id, self.observations.len());
                self.observations.push(Observation {
                    config: trial.config.clone(),
                    curve: trial.curve.values.clone(),
                });
            }
        }
    }

    /// Number of observations whose curves reach `round_end`.
    pub fn samples_reaching(&self, round_end: u32) -> usize {
        self.observations
            .iter()
            .filter(|o| o.curve.len() >= round_end as usize)
            .count()
    }

    /// Predicts the value `trial` would reach at `round_end`, using its
    /// curve prefix up to `feature_epoch`. `None` when the pool has no
    /// model for the key or anything about the prediction fails.
    pub fn predict(
        &mut self,
        round_end: u32,
        feature_epoch: u32,
        trial: &Trial,
        space: &SearchSpace,
    ) -> Option<f64> {
        self.ensure_model(round_end, feature_epoch, space)?;
        let features = features_from_curve(
            &trial.config,
            &trial.curve.values,
            feature_epoch as usize,
            space,
            self.target_epoch as usize,
        )
        .ok()?;
        let entry = self.models.get(&(round_end, feature_epoch))?;
        let value = entry.model.predict(&features.0);
        value.is_finite().then_some(value)
    }

    /// Leave-one-out residual spread for a key's samples, computed lazily
    /// and cached until the model retrains. `None` when there is no model
    /// or the estimate fails.
    pub fn sigma(&mut self, round_end: u32, feature_epoch: u32, space: &SearchSpace) -> Option<f64> {
        self.ensure_model(round_end, feature_epoch, space)?;
        if let Some(cached) = self.models.get(&(round_end, feature_epoch))?.sigma {
            return Some(cached);
        }
        let (xs, ys) = assemble_samples(
            &self.observations,
            round_end,
            feature_epoch,
            space,
            self.target_epoch,
        );
        let entry = self.models.get_mut(&(round_end, feature_epoch))?;
        entry.sigma = loocv_std(&xs, &ys, &self.svr).ok();
        entry.sigma
    }

    /// Trains or refreshes the model for a key. Returns `Some(())` when a
    /// model is available afterwards.
    fn ensure_model(&mut self, round_end: u32, feature_epoch: u32, space: &SearchSpace) -> Option<()> {
        if !matches!(self.kind, PredictorKind::Svr | PredictorKind::Qsvr) {
            return None;
        }
        if feature_epoch >= round_end {
            return None;
        }
        let (xs, ys) = assemble_samples(
            &self.observations,
            round_end,
            feature_epoch,
            space,
            self.target_epoch,
        );
        if xs.len() < self.min_samples {
            return None;
        }
        let needs_training = match self.models.get(&(round_end, feature_epoch)) {
            None => true,
            Some(entry) => xs.len() as f64 >= entry.trained_on as f64 * 1.25,
        };
        if needs_training {
            let trained = match self.kind {
                PredictorKind::Svr => train_svr(&xs, &ys, &self.svr),
                PredictorKind::Qsvr => {
                    let seed = mix_seed(self.seed, &[round_end as u64, feature_epoch as u64, xs.len() as u64]);
                    train_qsvr(&xs, &ys, &self.svr, &self.qsvr, seed)
                }
                _ => unreachable!(),
            };
            match trained {
                Ok(model) => {
                    self.models.insert(
                        (round_end, feature_epoch),
                        TrainedEntry {
                            model,
                            trained_on: xs.len(),
                            sigma: None,
                        },
                    );
                }
                Err(_) => {
                    // A failed retrain keeps any previous model; a failed
                    // first train leaves the key empty. Either way the
                    // caller degrades to "no prediction".
                }
            }
        }
        self.models.contains_key(&(round_end, feature_epoch)).then_some(())
    }
}

/// Collects the (features, target) pairs for one key, in observation order —
/// which is trial-id order, because observations are registered as trials
/// are drawn. The order matters for the QUBO path's most-recent cap.
fn assemble_samples(
    observations: &[Observation],
    round_end: u32,
    feature_epoch: u32,
    space: &SearchSpace,
    target_epoch: u32,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for obs in observations {
        if obs.curve.len() < round_end as usize {
            continue;
        }
        let Ok(features) = features_from_curve(
            &obs.config,
            &obs.curve,
            feature_epoch as usize,
            space,
            target_epoch as usize,
        ) else {
            continue;
        };
        xs.push(features.0);
        ys.push(obs.curve[round_end as usize - 1]);
    }
    (xs, ys)
}

/// Mixes a base seed with context words into an independent stream seed
/// (splitmix-style finalizer).
pub(crate) fn mix_seed(base: u64, words: &[u64]) -> u64 {
    let mut state = base ^ 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        state = state.wrapping_add(w).wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    }
    state
}
