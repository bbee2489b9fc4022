//! Classic Hyperband: bracketed successive halving with no predictor.
//!
//! Deliberately written as its own plain loop rather than as the
//! predictor-assisted scheduler with the predictor switched off, so the two
//! implementations can cross-check each other in tests.

use std::collections::BTreeMap;

use crate::domain::Trial;
use crate::error::Result;

use super::plan::plan_brackets;
use super::runner::TrialBackend;
use super::{draw_trials, eliminate_round, finish_outcome, train_to, EpochLedger};
use super::{RunOutcome, SchedulerConfig};

/// Runs every bracket of the Hyperband schedule against `backend`.
///
/// Each bracket draws its planned number of fresh trials, trains all
/// survivors to each round's budget, and keeps the best `⌊n/eta⌋` by
/// end-of-round value (ties to the lowest id). Trials finishing the last
/// round of their bracket complete; the winner is the best completed trial.
pub fn run_hyperband(
    cfg: &SchedulerConfig,
    backend: &mut dyn TrialBackend,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let r = cfg.resolve_r(backend.target_epoch())?;
    let brackets = plan_brackets(r, cfg.eta)?;
    let direction = backend.metric_direction();

    let mut trials: BTreeMap<_, Trial> = BTreeMap::new();
    let mut ledger = EpochLedger::new();

    for bracket in &brackets {
        let mut live = draw_trials(backend, &mut trials, bracket.initial_trials() as usize)?;
        for (i, round) in bracket.rounds.iter().enumerate() {
            let targets: Vec<_> = live.iter().map(|&id| (id, round.budget)).collect();
            train_to(backend, &mut trials, &targets, &mut ledger)?;
            if i + 1 == bracket.rounds.len() {
                for &id in &live {
                    trials.get_mut(&id).unwrap().complete();
                }
            } else {
                let keep = bracket.keep_after(i, cfg.eta) as usize;
                live = eliminate_round(&mut trials, &live, keep, direction);
            }
        }
    }

    finish_outcome(trials, ledger, direction)
}
