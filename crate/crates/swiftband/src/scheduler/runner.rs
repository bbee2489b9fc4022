//! The trial-execution boundary schedulers run against.
//!
//! A [`TrialBackend`] supplies fresh trials and executes batches of training
//! requests; it may replay recorded curves in-process or forward work to
//! remote workers. Schedulers only ever see curve prefixes up to the epochs
//! they paid for, and re-running the same request yields the same segment,
//! which is what makes failure-driven reassignment safe.

use std::collections::HashMap;

use crate::data::{DrawMode, LearningCurveDataset, TrialDrawer};
use crate::domain::{Trial, TrialId};
use crate::error::{Error, Result};

/// One training assignment: take a trial from `from_epoch` to `to_epoch`
/// (both counted in completed epochs, so the segment covers epochs
/// `from_epoch + 1 ..= to_epoch` of the curve).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainRequest {
    pub trial_id: TrialId,
    pub from_epoch: u32,
    pub to_epoch: u32,
}

/// The observed metric values for one completed request.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub trial_id: TrialId,
    /// Exactly `to_epoch - from_epoch` values.
    pub segment: Vec<f64>,
    /// Wall-clock cost of producing the segment, for reporting only.
    pub wall_time_ms: u64,
}

/// Where trials come from and how they train.
///
/// Contract: `run_batch` returns one result per request, in request order;
/// each segment has exactly `to_epoch - from_epoch` finite values; repeating
/// a request reproduces the same segment. `true_value_at` is a test-oracle
/// hook revealing the recorded value a trial would reach at `epoch`; it
/// returns `None` where that is unknowable (e.g. command-backed training).
pub trait TrialBackend {
    /// Dataset metadata: metric, direction, search space, target epoch.
    fn metric_direction(&self) -> crate::domain::Direction;
    /// The search space trials are drawn from.
    fn space(&self) -> &crate::domain::SearchSpace;
    /// Epochs a fully trained trial reaches.
    fn target_epoch(&self) -> u32;
    /// Draws the next trial.
    fn draw(&mut self) -> Result<Trial>;
    /// Executes one batch of independent training requests.
    fn run_batch(&mut self, requests: &[TrainRequest]) -> Result<Vec<TrainResult>>;
    /// Oracle hook: the value `trial` would show at `epoch`, if recorded.
    fn true_value_at(&self, trial: TrialId, epoch: u32) -> Option<f64>;
}

/// Validates that `results` answers `requests` exactly: same ids in the
/// same order, each segment of the promised length.
pub fn check_batch_shape(requests: &[TrainRequest], results: &[TrainResult]) -> Result<()> {
    if requests.len() != results.len() {
        return Err(Error::Distributed(format!(
            "batch returned {} results for {} requests",
            results.len(),
            requests.len()
        )));
    }
    for (req, res) in requests.iter().zip(results) {
        if req.trial_id != res.trial_id {
            return Err(Error::Distributed(format!(
                "batch result for {} does not match request for {}",
                res.trial_id, req.trial_id
            )));
        }
        let expected = (req.to_epoch - req.from_epoch) as usize;
        if res.segment.len() != expected {
            return Err(Error::Distributed(format!(
                "{}: segment has {} values, expected {expected}",
                req.trial_id,
                res.segment.len()
            )));
        }
    }
    Ok(())
}

/// Replays a recorded learning-curve dataset: drawing a trial claims a
/// dataset row, and training reveals that row's values epoch by epoch.
pub struct ReplayBackend<'a> {
    dataset: &'a LearningCurveDataset,
    drawer: TrialDrawer,
    rows: HashMap<TrialId, usize>,
    next_id: u64,
}

impl<'a> ReplayBackend<'a> {
    pub fn new(dataset: &'a LearningCurveDataset, mode: DrawMode, seed: u64) -> Self {
        ReplayBackend {
            dataset,
            drawer: TrialDrawer::new(dataset.len(), seed, mode),
            rows: HashMap::new(),
            next_id: 0,
        }
    }

    /// Dataset row backing a drawn trial.
    pub fn row_of(&self, trial: TrialId) -> Option<usize> {
        self.rows.get(&trial).copied()
    }
}

impl TrialBackend for ReplayBackend<'_> {
    fn metric_direction(&self) -> crate::domain::Direction {
        self.dataset.meta.direction
    }

    fn space(&self) -> &crate::domain::SearchSpace {
        &self.dataset.meta.space
    }

    fn target_epoch(&self) -> u32 {
        self.dataset.meta.target_epoch as u32
    }

    fn draw(&mut self) -> Result<Trial> {
        let row = self.drawer.draw()?;
        let id = TrialId(self.next_id);
        self.next_id += 1;
        self.rows.insert(id, row);
        Ok(self.dataset.make_trial(id, row))
    }

    fn run_batch(&mut self, requests: &[TrainRequest]) -> Result<Vec<TrainResult>> {
        let mut results = Vec::with_capacity(requests.len());
        for req in requests {
            let row = *self.rows.get(&req.trial_id).ok_or_else(|| {
                Error::Distributed(format!("{} was never drawn here", req.trial_id))
            })?;
            if req.from_epoch >= req.to_epoch {
                return Err(Error::Distributed(format!(
                    "{}: empty training segment [{}, {})",
                    req.trial_id, req.from_epoch, req.to_epoch
                )));
            }
            if req.to_epoch as usize > self.dataset.meta.target_epoch {
                return Err(Error::Distributed(format!(
                    "{}: requested epoch {} beyond the recorded {}",
                    req.trial_id, req.to_epoch, self.dataset.meta.target_epoch
                )));
            }
            let segment = self.dataset.rows[row].values
                [req.from_epoch as usize..req.to_epoch as usize]
                .to_vec();
            results.push(TrainResult {
                trial_id: req.trial_id,
                segment,
                wall_time_ms: 0,
            });
        }
        Ok(results)
    }

    fn true_value_at(&self, trial: TrialId, epoch: u32) -> Option<f64> {
        let row = self.rows.get(&trial)?;
        self.dataset.value_at(*row, epoch as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn dataset() -> LearningCurveDataset {
        generate_synthetic(
            &SyntheticSpec {
                rows: 12,
                hp_dim: 2,
                target_epoch: 9,
                ..SyntheticSpec::default()
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn draw_then_train_replays_the_stored_row() {
        let ds = dataset();
        let mut backend = ReplayBackend::new(&ds, DrawMode::WithoutReplacement, 5);
        let trial = backend.draw().unwrap();
        let row = backend.row_of(trial.id).unwrap();

        let first = backend
            .run_batch(&[TrainRequest {
                trial_id: trial.id,
                from_epoch: 0,
                to_epoch: 5,
            }])
            .unwrap();
        assert_eq!(first[0].segment, ds.rows[row].values[..5].to_vec());

        let rest = backend
            .run_batch(&[TrainRequest {
                trial_id: trial.id,
                from_epoch: 5,
                to_epoch: 9,
            }])
            .unwrap();
        assert_eq!(rest[0].segment, ds.rows[row].values[5..9].to_vec());
    }

    #[test]
    fn repeating_a_request_is_idempotent() {
        let ds = dataset();
        let mut backend = ReplayBackend::new(&ds, DrawMode::WithoutReplacement, 5);
        let trial = backend.draw().unwrap();
        let req = TrainRequest {
            trial_id: trial.id,
            from_epoch: 2,
            to_epoch: 7,
        };
        let a = backend.run_batch(&[req]).unwrap();
        let b = backend.run_batch(&[req]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unknown_trials_and_bad_ranges() {
        let ds = dataset();
        let mut backend = ReplayBackend::new(&ds, DrawMode::WithoutReplacement, 5);
        let trial = backend.draw().unwrap();
        assert!(backend
            .run_batch(&[TrainRequest {
                trial_id: TrialId(99),
                from_epoch: 0,
                to_epoch: 1,
            }])
            .is_err());
        assert!(backend
            .run_batch(&[TrainRequest {
                trial_id: trial.id,
                from_epoch: 3,
                to_epoch: 3,
            }])
            .is_err());
        assert!(backend
            .run_batch(&[TrainRequest {
                trial_id: trial.id,
                from_epoch: 0,
                to_epoch: 10,
            }])
            .is_err());
    }

    #[test]
    fn oracle_hook_reveals_recorded_values() {
        let ds = dataset();
        let mut backend = ReplayBackend::new(&ds, DrawMode::WithoutReplacement, 5);
        let trial = backend.draw().unwrap();
        let row = backend.row_of(trial.id).unwrap();
        assert_eq!(
            backend.true_value_at(trial.id, 9),
            Some(ds.rows[row].values[8])
        );
        assert_eq!(backend.true_value_at(TrialId(50), 1), None);
    }

    #[test]
    fn batch_shape_checker_catches_mismatches() {
        let req = [TrainRequest {
            trial_id: TrialId(1),
            from_epoch: 0,
            to_epoch: 3,
        }];
        let ok = [TrainResult {
            trial_id: TrialId(1),
            segment: vec![1.0, 2.0, 3.0],
            wall_time_ms: 0,
        }];
        assert!(check_batch_shape(&req, &ok).is_ok());
        let short = [TrainResult {
            trial_id: TrialId(1),
            segment: vec![1.0],
            wall_time_ms: 0,
        }];
        assert!(check_batch_shape(&req, &short).is_err());
        let wrong_id = [TrainResult {
            trial_id: TrialId(2),
            segment: vec![1.0, 2.0, 3.0],
            wall_time_ms: 0,
        }];
        assert!(check_batch_shape(&req, &wrong_id).is_err());
        assert!(check_batch_shape(&req, &[]).is_err());
    }
}
