//! Early-stopping search schedulers.
//!
//! Four algorithms share one trial-execution boundary ([`TrialBackend`]):
//!
//! * [`hyperband::run_hyperband`] — classic bracketed successive halving.
//! * [`swift::run_swift_hyperband`] — adds one predictor decision point per
//!   round: a few pathfinder trials define a threshold, the rest are
//!   early-terminated when their predicted round-end value falls short.
//! * [`fast::run_fast_hyperband`] — sequential variant with a Gaussian
//!   termination test after every single epoch.
//! * [`threshold::run_threshold_search`] — the M-full/N-partial predictor
//!   baseline.

pub mod fast;
pub mod hyperband;
pub mod ledger;
pub mod plan;
pub mod pool;
pub mod runner;
pub mod swift;
#[cfg(test)]
pub(crate) mod testutil;
pub mod threshold;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{best_trial, Direction, Trial, TrialId};
use crate::error::{Error, Result};
use crate::predictor::qubo::QsvrParams;
use crate::predictor::svr::SvrParams;

pub use ledger::EpochLedger;
pub use plan::{plan_brackets, planned_epochs, planned_total_epochs, BracketPlan, RoundSpec};
pub use pool::{PredictorKind, PredictorPool};
pub use runner::{ReplayBackend, TrainRequest, TrainResult, TrialBackend};

/// Everything the schedulers need to know, with working defaults for a
/// replayed search on the bundled synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    /// Maximum epochs per trial; `None` uses the dataset's target epoch.
    pub r_max: Option<u32>,
    /// Elimination factor: each round keeps roughly `1/eta` of its trials.
    pub eta: u32,
    /// Position of the predictor decision point inside a round, as a
    /// fraction of the round's epoch span.
    pub decision_fraction: f64,
    /// Lower bound on pathfinders per round.
    pub pathfinder_min: usize,
    /// Pathfinder count is `max(pathfinder_min, ⌈n / (divisor·eta)⌉)`.
    pub pathfinder_divisor: usize,
    /// Quantile of pathfinder round-end values that becomes the termination
    /// threshold (in `(0, 1]`; 1.0 = the worst pathfinder, provably safe).
    pub threshold_quantile: f64,
    /// Samples required before a predictor key yields a model.
    pub min_predictor_samples: usize,
    /// Which predictor the schedulers consult.
    pub predictor: PredictorKind,
    /// Fast scheduler: terminate when the probability of beating the round
    /// cutoff falls below this.
    pub fast_termination_prob: f64,
    /// Threshold baseline: trials trained to completion (M).
    pub baseline_full: usize,
    /// Threshold baseline: trials trained partially (N).
    pub baseline_partial: usize,
    /// Seed for every scheduler-owned random choice (pathfinder shuffles,
    /// annealing); trial draws are seeded by the backend.
    pub seed: u64,
    /// Regressor knobs.
    pub svr: SvrParams,
    /// QUBO/annealing knobs.
    pub qsvr: QsvrParams,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            r_max: None,
            eta: 3,
            decision_fraction: 0.25,
            pathfinder_min: 2,
            pathfinder_divisor: 2,
            threshold_quantile: 0.5,
            min_predictor_samples: 7,
            predictor: PredictorKind::Svr,
            fast_termination_prob: 0.05,
            baseline_full: 10,
            baseline_partial: 40,
            seed: 0,
            svr: SvrParams::default(),
            qsvr: QsvrParams::default(),
        }
    }
}

impl SchedulerConfig {
    /// Checks every knob that does not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.eta < 2 {
            return Err(Error::Config(format!(
                "elimination factor must be at least 2, got {}",
                self.eta
            )));
        }
        if !(self.decision_fraction > 0.0 && self.decision_fraction < 1.0) {
            return Err(Error::Config(format!(
                "decision_fraction must be in (0, 1), got {}",
                self.decision_fraction
            )));
        }
        if !(self.threshold_quantile > 0.0 && self.threshold_quantile <= 1.0) {
            return Err(Error::Config(format!(
                "threshold_quantile must be in (0, 1], got {}",
                self.threshold_quantile
            )));
        }
        if !(0.0..=1.0).contains(&self.fast_termination_prob)
            || !self.fast_termination_prob.is_finite()
        {
            return Err(Error::Config(format!(
                "fast_termination_prob must be in [0, 1], got {}",
                self.fast_termination_prob
            )));
        }
        if self.pathfinder_min < 1 || self.pathfinder_divisor < 1 {
            return Err(Error::Config(
                "pathfinder_min and pathfinder_divisor must be at least 1".into(),
            ));
        }
        if self.min_predictor_samples < 2 {
            return Err(Error::Config(
                "min_predictor_samples must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// The per-trial budget for a dataset trained to `target_epoch`.
    pub fn resolve_r(&self, target_epoch: u32) -> Result<u32> {
        let r = self.r_max.unwrap_or(target_epoch);
        if r > target_epoch {
            return Err(Error::Config(format!(
                "budget {r} exceeds the dataset's {target_epoch} recorded epochs"
            )));
        }
        if r < self.eta {
            return Err(Error::Config(format!(
                "budget {r} must be at least the elimination factor {}",
                self.eta
            )));
        }
        Ok(r)
    }
}

/// The search algorithms the experiment driver can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hyperband,
    Fast,
    SwiftSvr,
    SwiftQsvr,
    ThresholdSearch,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Hyperband,
        Algorithm::Fast,
        Algorithm::SwiftSvr,
        Algorithm::SwiftQsvr,
        Algorithm::ThresholdSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hyperband => "hyperband",
            Algorithm::Fast => "fast",
            Algorithm::SwiftSvr => "swift_svr",
            Algorithm::SwiftQsvr => "swift_qsvr",
            Algorithm::ThresholdSearch => "threshold_search",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperband" => Ok(Algorithm::Hyperband),
            "fast" => Ok(Algorithm::Fast),
            "swift_svr" => Ok(Algorithm::SwiftSvr),
            "swift_qsvr" => Ok(Algorithm::SwiftQsvr),
            "threshold_search" => Ok(Algorithm::ThresholdSearch),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected one of hyperband, fast, swift_svr, swift_qsvr, threshold_search)"
            ))),
        }
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// The best completed trial.
    pub winner: TrialId,
    /// Its final metric value.
    pub best_metric: f64,
    /// Every trial the run touched, sorted by id, with terminal statuses.
    pub trials: Vec<Trial>,
    /// Exact epoch accounting.
    pub ledger: EpochLedger,
}

impl RunOutcome {
    /// Ids with the given status, sorted.
    pub fn ids_with_status(&self, status: crate::domain::TrialStatus) -> Vec<TrialId> {
        self.trials
            .iter()
            .filter(|t| t.status == status)
            .map(|t| t.id)
            .collect()
    }
}

/// Runs `algorithm` against `backend`. The swift variants force their
/// predictor kind; the other algorithms use `cfg.predictor` as configured.
pub fn run_algorithm(
    algorithm: Algorithm,
    cfg: &SchedulerConfig,
    backend: &mut dyn TrialBackend,
) -> Result<RunOutcome> {
    match algorithm {
        Algorithm::Hyperband => hyperband::run_hyperband(cfg, backend),
        Algorithm::Fast => fast::run_fast_hyperband(cfg, backend),
        Algorithm::SwiftSvr => {
            let cfg = SchedulerConfig {
                predictor: PredictorKind::Svr,
                ..cfg.clone()
            };
            swift::run_swift_hyperband(&cfg, backend)
        }
        Algorithm::SwiftQsvr => {
            let cfg = SchedulerConfig {
                predictor: PredictorKind::Qsvr,
                ..cfg.clone()
            };
            swift::run_swift_hyperband(&cfg, backend)
        }
        Algorithm::ThresholdSearch => threshold::run_threshold_search(cfg, backend),
    }
}

/// Index of the `q`-quantile in a best-first ranking of `len` values:
/// `⌈q·len⌉ - 1`, clamped into range. `q = 1.0` picks the worst value.
pub(crate) fn quantile_index(len: usize, q: f64) -> usize {
    debug_assert!(len >= 1);
    let idx = (q * len as f64).ceil() as usize;
    idx.clamp(1, len) - 1
}

/// Sorts metric values best-first under `direction`.
pub(crate) fn sort_best_first(values: &mut [f64], direction: Direction) {
    match direction {
        Direction::Minimize => values.sort_by(f64::total_cmp),
        Direction::Maximize => values.sort_by(|a, b| f64::total_cmp(b, a)),
    }
}

/// The `q`-quantile of `values` under `direction` (best-first ranking).
pub(crate) fn quantile_threshold(mut values: Vec<f64>, q: f64, direction: Direction) -> f64 {
    sort_best_first(&mut values, direction);
    values[quantile_index(values.len(), q)]
}

/// Trains each `(trial, to_epoch)` target from the trial's current progress,
/// in one backend batch, and applies the results in id order. Targets the
/// trial already reached are skipped.
pub(crate) fn train_to(
    backend: &mut dyn TrialBackend,
    trials: &mut BTreeMap<TrialId, Trial>,
    targets: &[(TrialId, u32)],
    ledger: &mut EpochLedger,
) -> Result<()> {
    let mut requests = Vec::with_capacity(targets.len());
    for &(id, to) in targets {
        let trial = trials.get_mut(&id).expect("training target must be a drawn trial");
        let from = trial.curve.len() as u32;
        if from >= to {
            continue;
        }
        if to > backend.target_epoch() {
            return Err(Error::Config(format!(
                "{id}: target epoch {to} beyond the dataset's {}",
                backend.target_epoch()
            )));
        }
        requests.push(TrainRequest {
            trial_id: id,
            from_epoch: from,
            to_epoch: to,
        });
    }
    if requests.is_empty() {
        return Ok(());
    }
    debug_assert!(requests.windows(2).all(|w| w[0].trial_id < w[1].trial_id));
    let results = backend.run_batch(&requests)?;
    runner::check_batch_shape(&requests, &results)?;
    for (req, res) in requests.iter().zip(&results) {
        let trial = trials.get_mut(&req.trial_id).expect("request built from this map");
        trial.begin_training();
        trial.record_segment(&res.segment)?;
        trial.pause();
        ledger.record(req.trial_id, req.from_epoch, req.to_epoch);
    }
    Ok(())
}

/// Round-end elimination: ranks `alive` by last observed value (best first,
/// ties to the lowest id), keeps at most `keep`, marks the rest eliminated.
/// Returns the kept ids sorted ascending.
pub(crate) fn eliminate_round(
    trials: &mut BTreeMap<TrialId, Trial>,
    alive: &[TrialId],
    keep: usize,
    direction: Direction,
) -> Vec<TrialId> {
    let mut ranked: Vec<(f64, TrialId)> = alive
        .iter()
        .map(|&id| {
            let value = trials[&id]
                .last_value()
                .expect("alive trials have observed values");
            (value, id)
        })
        .collect();
    ranked.sort_by(|(va, ia), (vb, ib)| {
        let by_value = match direction {
            Direction::Minimize => va.total_cmp(vb),
            Direction::Maximize => vb.total_cmp(va),
        };
        by_value.then(ia.cmp(ib))
    });
    let mut kept: Vec<TrialId> = ranked.iter().take(keep).map(|&(_, id)| id).collect();
    for &(_, id) in ranked.iter().skip(keep) {
        trials.get_mut(&id).unwrap().eliminate_by_round();
    }
    kept.sort();
    kept
}

/// Wraps up a run: the winner is the best trial that completed its full
/// schedule, ties to the lowest id.
pub(crate) fn finish_outcome(
    trials: BTreeMap<TrialId, Trial>,
    ledger: EpochLedger,
    direction: Direction,
) -> Result<RunOutcome> {
    let winner = {
        let completed = trials
            .values()
            .filter(|t| t.status == crate::domain::TrialStatus::Completed);
        let best = best_trial(completed, direction)?;
        (best.id, best.last_value().expect("winner has a curve"))
    };
    Ok(RunOutcome {
        winner: winner.0,
        best_metric: winner.1,
        trials: trials.into_values().collect(),
        ledger,
    })
}

/// Draws `count` fresh trials into `trials`, returning their ids sorted.
pub(crate) fn draw_trials(
    backend: &mut dyn TrialBackend,
    trials: &mut BTreeMap<TrialId, Trial>,
    count: usize,
) -> Result<Vec<TrialId>> {
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        let trial = backend.draw()?;
        ids.push(trial.id);
        trials.insert(trial.id, trial);
    }
    ids.sort();
    Ok(ids)
}
