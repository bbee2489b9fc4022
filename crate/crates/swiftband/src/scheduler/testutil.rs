//! Hand-scripted trial backend for scheduler unit tests.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    sample_config, Direction, HpDim, HpDomain, HyperparameterConfig, LearningCurve, SearchSpace,
    Trial, TrialId,
};
use crate::error::{Error, Result};

use super::runner::{TrainRequest, TrainResult, TrialBackend};

/// Serves predefined curves in draw order, so test expectations can be
/// computed by hand.
pub(crate) struct ScriptedBackend {
    space: SearchSpace,
    direction: Direction,
    target: u32,
    curves: Vec<Vec<f64>>,
    configs: Vec<HyperparameterConfig>,
    assigned: HashMap<TrialId, usize>,
    next: usize,
    next_id: u64,
}

impl ScriptedBackend {
    /// A minimizing backend over `curves`; every curve must have `target`
    /// values. Configurations are sampled deterministically.
    pub fn minimize(curves: Vec<Vec<f64>>, target: u32) -> Self {
        Self::with_direction(curves, target, Direction::Minimize)
    }

    pub fn with_direction(curves: Vec<Vec<f64>>, target: u32, direction: Direction) -> Self {
        assert!(curves.iter().all(|c| c.len() == target as usize));
        let space = SearchSpace {
            dims: vec![
                HpDim {
                    name: "h_1".into(),
                    domain: HpDomain::Continuous { low: 0.0, high: 1.0 },
                },
                HpDim {
                    name: "h_2".into(),
                    domain: HpDomain::Continuous { low: 0.0, high: 1.0 },
                },
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let configs = (0..curves.len())
            .map(|_| sample_config(&space, &mut rng))
            .collect();
        ScriptedBackend {
            space,
            direction,
            target,
            curves,
            configs,
            assigned: HashMap::new(),
            next: 0,
            next_id: 0,
        }
    }
}

impl TrialBackend for ScriptedBackend {
    fn metric_direction(&self) -> Direction {
        self.direction
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn target_epoch(&self) -> u32 {
        self.target
    }

    fn draw(&mut self) -> Result<Trial> {
        if self.next >= self.curves.len() {
            return Err(Error::SourceExhausted {
                needed: self.next + 1,
                available: self.curves.len(),
            });
        }
        let id = TrialId(self.next_id);
        self.next_id += 1;
        self.assigned.insert(id, self.next);
        let config = self.configs[self.next].clone();
        self.next += 1;
        Ok(Trial::new(
            id,
            config,
            LearningCurve::empty("loss", self.direction),
        ))
    }

    fn run_batch(&mut self, requests: &[TrainRequest]) -> Result<Vec<TrainResult>> {
        requests
            .iter()
            .map(|req| {
                let row = *self
                    .assigned
                    .get(&req.trial_id)
                    .ok_or_else(|| Error::Config(format!("{} was never drawn", req.trial_id)))?;
                let curve = &self.curves[row];
                let segment =
                    curve[req.from_epoch as usize..req.to_epoch as usize].to_vec();
                Ok(TrainResult {
                    trial_id: req.trial_id,
                    segment,
                    wall_time_ms: 0,
                })
            })
            .collect()
    }

    fn true_value_at(&self, trial: TrialId, epoch: u32) -> Option<f64> {
        let row = *self.assigned.get(&trial)?;
        if epoch == 0 {
            return None;
        }
        self.curves[row].get(epoch as usize - 1).copied()
    }
}
