//! Sequential successive halving with a per-epoch termination test.
//!
//! Trials run one at a time, epoch by epoch. After every epoch strictly
//! inside a round, the scheduler estimates the probability that the trial
//! will beat the round's cutoff — a quantile of the round-end values of
//! trials that already finished this round — by placing a Gaussian with the
//! predictor's leave-one-out spread around the predicted round-end value.
//! When that probability drops below `fast_termination_prob`, the trial
//! stops immediately.
//!
//! With the probability floor at zero the test is skipped entirely and the
//! schedule degenerates to classic Hyperband, epoch accounting included.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{compare_metric, Direction, Trial, TrialId};
use crate::error::{Error, Result};

use super::plan::plan_brackets;
use super::pool::{PredictorKind, PredictorPool};
use super::runner::TrialBackend;
use super::{
    draw_trials, eliminate_round, finish_outcome, quantile_threshold, train_to, EpochLedger,
    RunOutcome, SchedulerConfig,
};

/// Runs the per-epoch-decision schedule against `backend`.
///
/// The predictor must be `svr`, `oracle` or `disabled`: this scheduler
/// consults a model after every single epoch, which the annealed variant is
/// far too expensive for.
pub fn run_fast_hyperband(
    cfg: &SchedulerConfig,
    backend: &mut dyn TrialBackend,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if cfg.predictor == PredictorKind::Qsvr {
        return Err(Error::Config(
            "the per-epoch scheduler supports svr, oracle or disabled predictors; \
             qsvr would retrain an annealed model after every epoch"
                .into(),
        ));
    }
    let r = cfg.resolve_r(backend.target_epoch())?;
    let brackets = plan_brackets(r, cfg.eta)?;
    let direction = backend.metric_direction();
    let delta = cfg.fast_termination_prob;
    let mut pool = PredictorPool::new(
        cfg.predictor,
        cfg.min_predictor_samples,
        cfg.svr.clone(),
        cfg.qsvr.clone(),
        cfg.seed,
        backend.target_epoch(),
    );
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut trials: BTreeMap<TrialId, Trial> = BTreeMap::new();
    let mut ledger = EpochLedger::new();

    for bracket in &brackets {
        let mut live = draw_trials(backend, &mut trials, bracket.initial_trials() as usize)?;
        for (i, round) in bracket.rounds.iter().enumerate() {
            let budget = round.budget;
            let mut finished: Vec<TrialId> = Vec::new();
            let mut finals: Vec<f64> = Vec::new();

            for &id in &live {
                let mut terminated = false;
                loop {
                    let reached = trials[&id].curve.len() as u32;
                    if reached >= budget {
                        break;
                    }
                    train_to(backend, &mut trials, &[(id, reached + 1)], &mut ledger)?;
                    let now = reached + 1;
                    if cfg.predictor == PredictorKind::Svr {
                        pool.observe(&trials[&id]);
                    }
                    if now >= budget {
                        break;
                    }
                    if delta <= 0.0 || cfg.predictor == PredictorKind::Disabled {
                        continue;
                    }
                    if finals.is_empty() {
                        // Nobody has finished this round yet, so there is
                        // no cutoff to fail against.
                        continue;
                    }
                    let cutoff =
                        quantile_threshold(finals.clone(), cfg.threshold_quantile, direction);
                    let (prediction, sigma) = match cfg.predictor {
                        PredictorKind::Oracle => {
                            match backend.true_value_at(id, budget) {
                                Some(v) => (v, 0.0),
                                None => continue,
                            }
                        }
                        PredictorKind::Svr => {
                            let Some(p) =
                                pool.predict(budget, now, &trials[&id], backend.space())
                            else {
                                continue;
                            };
                            let Some(s) = pool.sigma(budget, now, backend.space()) else {
                                continue;
                            };
                            (p, s)
                        }
                        _ => unreachable!("kinds checked above"),
                    };
                    if beat_probability(&normal, prediction, sigma, cutoff, direction) < delta {
                        trials.get_mut(&id).unwrap().terminate_by_predictor();
                        terminated = true;
                        break;
                    }
                }
                if !terminated {
                    finished.push(id);
                    finals.push(trials[&id].last_value().expect("finished the round"));
                }
            }

            if i + 1 == bracket.rounds.len() {
                for &id in &finished {
                    trials.get_mut(&id).unwrap().complete();
                }
                live = Vec::new();
            } else {
                let keep = bracket.keep_after(i, cfg.eta) as usize;
                live = eliminate_round(&mut trials, &finished, keep, direction);
            }
        }
    }

    finish_outcome(trials, ledger, direction)
}

/// Probability that a value drawn from `N(prediction, sigma²)` beats
/// `cutoff` under `direction`.
///
/// A degenerate spread gets the Gaussian's pointwise limit: strictly
/// better → 1, exact tie → ½, strictly worse → 0. Ties therefore survive
/// any termination floor below ½.
fn beat_probability(
    normal: &Normal,
    prediction: f64,
    sigma: f64,
    cutoff: f64,
    direction: Direction,
) -> f64 {
    const TINY_SIGMA: f64 = 1e-12;
    if sigma <= TINY_SIGMA {
        return match compare_metric(prediction, cutoff, direction) {
            Ok(Ordering::Less) => 1.0,
            Ok(Ordering::Equal) => 0.5,
            Ok(Ordering::Greater) => 0.0,
            Err(_) => 1.0, // unusable prediction: fail open
        };
    }
    let z = match direction {
        Direction::Minimize => (cutoff - prediction) / sigma,
        Direction::Maximize => (prediction - cutoff) / sigma,
    };
    normal.cdf(z)
}
