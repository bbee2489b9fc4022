//! Predictor-assisted successive halving.
//!
//! Each round that is wide and long enough gains one early decision point:
//! a few *pathfinder* trials train straight to the round's budget, every
//! other trial pauses at the decision epoch, and a performance predictor
//! trained on previously observed curves estimates each paused trial's
//! round-end value. Trials predicted to fall strictly short of a quantile
//! of the pathfinder results are terminated without finishing the round;
//! everything else resumes. Round-end elimination then proceeds exactly as
//! in classic Hyperband.
//!
//! Every predictor failure fails open: a trial without a usable prediction
//! always survives to the round's end.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{compare_metric, Direction, Trial, TrialId};
use crate::error::Result;

use super::plan::{plan_brackets, BracketPlan};
use super::pool::{mix_seed, PredictorKind, PredictorPool};
use super::runner::TrialBackend;
use super::{
    draw_trials, eliminate_round, finish_outcome, quantile_threshold, train_to, EpochLedger,
    RunOutcome, SchedulerConfig,
};

/// Runs the predictor-assisted schedule against `backend`, consulting
/// `cfg.predictor` at each round's decision point.
pub fn run_swift_hyperband(
    cfg: &SchedulerConfig,
    backend: &mut dyn TrialBackend,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let r = cfg.resolve_r(backend.target_epoch())?;
    let brackets = plan_brackets(r, cfg.eta)?;
    let direction = backend.metric_direction();
    let mut pool = PredictorPool::new(
        cfg.predictor,
        cfg.min_predictor_samples,
        cfg.svr.clone(),
        cfg.qsvr.clone(),
        cfg.seed,
        backend.target_epoch(),
    );

    let mut trials: BTreeMap<TrialId, Trial> = BTreeMap::new();
    let mut ledger = EpochLedger::new();

    for bracket in &brackets {
        let mut live = draw_trials(backend, &mut trials, bracket.initial_trials() as usize)?;
        let mut prev = 0u32;
        for i in 0..bracket.rounds.len() {
            live = run_round(
                cfg, backend, &mut pool, &mut trials, &mut ledger, direction, bracket, i, prev,
                &live,
            )?;
            prev = bracket.rounds[i].budget;
        }
    }

    finish_outcome(trials, ledger, direction)
}

/// Pathfinders for a round of `n_live` trials:
/// `max(pathfinder_min, ⌈n_live / (pathfinder_divisor · eta)⌉)`.
pub(crate) fn pathfinder_count(cfg: &SchedulerConfig, n_live: usize) -> usize {
    let spread = n_live.div_ceil(cfg.pathfinder_divisor * cfg.eta as usize);
    cfg.pathfinder_min.max(spread)
}

/// The epoch at which this round pauses non-pathfinders:
/// `decision_fraction` of the way through the round's fresh epochs,
/// rounded up.
pub(crate) fn decision_epoch(cfg: &SchedulerConfig, prev: u32, budget: u32) -> u32 {
    let span = budget - prev;
    prev + (cfg.decision_fraction * span as f64).ceil() as u32
}

/// Splits `live` (sorted ids) into `k` pathfinders and the remaining
/// candidates via a seeded shuffle keyed on the bracket and round, both
/// halves returned sorted ascending.
pub(crate) fn choose_pathfinders(
    seed: u64,
    bracket: u32,
    round: u32,
    live: &[TrialId],
    k: usize,
) -> (Vec<TrialId>, Vec<TrialId>) {
    debug_assert!(live.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(k <= live.len());
    let mut order = live.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[bracket as u64, round as u64]));
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut pathfinders = order[..k].to_vec();
    let mut candidates = order[k..].to_vec();
    pathfinders.sort();
    candidates.sort();
    (pathfinders, candidates)
}

/// One round: optional predictor phase, round-end elimination. Returns the
/// promoted ids (empty after a bracket's final round).
#[allow(clippy::too_many_arguments)]
fn run_round(
    cfg: &SchedulerConfig,
    backend: &mut dyn TrialBackend,
    pool: &mut PredictorPool,
    trials: &mut BTreeMap<TrialId, Trial>,
    ledger: &mut EpochLedger,
    direction: Direction,
    bracket: &BracketPlan,
    round_index: usize,
    prev: u32,
    live: &[TrialId],
) -> Result<Vec<TrialId>> {
    let budget = bracket.rounds[round_index].budget;
    let n_live = live.len();
    let e_dec = decision_epoch(cfg, prev, budget);
    let k = pathfinder_count(cfg, n_live);

    // The decision point only pays off when the round is wide enough to
    // split and long enough that pausing at e_dec actually skips epochs.
    let use_predictor = cfg.predictor != PredictorKind::Disabled
        && n_live > cfg.eta as usize
        && e_dec < budget
        && k < n_live;

    let alive = if use_predictor {
        let (pathfinders, candidates) =
            choose_pathfinders(cfg.seed, bracket.s, round_index as u32, live, k);

        // Phase 1, one batch: pathfinders run the whole round, candidates
        // stop at the decision epoch.
        let mut targets: Vec<(TrialId, u32)> = pathfinders
            .iter()
            .map(|&id| (id, budget))
            .chain(candidates.iter().map(|&id| (id, e_dec)))
            .collect();
        targets.sort_by_key(|&(id, _)| id);
        train_to(backend, trials, &targets, ledger)?;
        observe_live(pool, trials, live, cfg.predictor);

        let pathfinder_finals: Vec<f64> = pathfinders
            .iter()
            .map(|&id| trials[&id].last_value().expect("pathfinders just trained"))
            .collect();
        let threshold =
            quantile_threshold(pathfinder_finals, cfg.threshold_quantile, direction);

        // Terminate candidates predicted strictly worse than the threshold;
        // ties and missing predictions survive.
        let mut survivors = Vec::with_capacity(candidates.len());
        for &id in &candidates {
            let prediction = match cfg.predictor {
                PredictorKind::Oracle => backend.true_value_at(id, budget),
                _ => pool.predict(budget, e_dec, &trials[&id], backend.space()),
            };
            let doomed = match prediction {
                Some(p) => matches!(
                    compare_metric(p, threshold, direction),
                    Ok(Ordering::Greater)
                ),
                None => false,
            };
            if doomed {
                trials.get_mut(&id).unwrap().terminate_by_predictor();
            } else {
                survivors.push(id);
            }
        }

        // Phase 2: survivors finish the round.
        let targets: Vec<(TrialId, u32)> = survivors.iter().map(|&id| (id, budget)).collect();
        train_to(backend, trials, &targets, ledger)?;
        observe_live(pool, trials, &survivors, cfg.predictor);

        let mut alive = pathfinders;
        alive.extend(survivors);
        alive.sort();
        alive
    } else {
        let targets: Vec<(TrialId, u32)> = live.iter().map(|&id| (id, budget)).collect();
        train_to(backend, trials, &targets, ledger)?;
        observe_live(pool, trials, live, cfg.predictor);
        live.to_vec()
    };

    if round_index + 1 == bracket.rounds.len() {
        for &id in &alive {
            trials.get_mut(&id).unwrap().complete();
        }
        Ok(Vec::new())
    } else {
        let keep = bracket.keep_after(round_index, cfg.eta) as usize;
        Ok(eliminate_round(trials, &alive, keep, direction))
    }
}

/// Feeds current curves into the pool (skipped for predictor kinds that
/// never train models).
fn observe_live(
    pool: &mut PredictorPool,
    trials: &BTreeMap<TrialId, Trial>,
    ids: &[TrialId],
    kind: PredictorKind,
) {
    if !matches!(kind, PredictorKind::Svr | PredictorKind::Qsvr) {
        return;
    }
    for id in ids {
        pool.observe(&trials[id]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, DrawMode, SyntheticSpec};
    use crate::domain::TrialStatus;
    use crate::scheduler::hyperband::run_hyperband;
    use crate::scheduler::plan::planned_epochs;
    use crate::scheduler::runner::ReplayBackend;
    use crate::scheduler::testutil::ScriptedBackend;

    fn base_cfg(r: u32, eta: u32, kind: PredictorKind) -> SchedulerConfig {
        SchedulerConfig {
            r_max: Some(r),
            eta,
            predictor: kind,
            ..SchedulerConfig::default()
        }
    }

    #[test]
    fn pathfinder_count_follows_width() {
        let cfg = SchedulerConfig::default(); // min 2, divisor 2, eta 3
        assert_eq!(pathfinder_count(&cfg, 81), 14); // ⌈81/6⌉
        assert_eq!(pathfinder_count(&cfg, 27), 5);
        assert_eq!(pathfinder_count(&cfg, 9), 2);
        assert_eq!(pathfinder_count(&cfg, 5), 2); // floor kicks in
        assert_eq!(pathfinder_count(&cfg, 2), 2);
    }

    #[test]
    fn decision_epoch_rounds_up_within_the_span() {
        let cfg = SchedulerConfig::default(); // fraction 0.25
        assert_eq!(decision_epoch(&cfg, 0, 1), 1); // span 1 → no gap
        assert_eq!(decision_epoch(&cfg, 1, 3), 2); // ⌈0.25·2⌉ = 1
        assert_eq!(decision_epoch(&cfg, 3, 9), 5); // ⌈0.25·6⌉ = 2
        assert_eq!(decision_epoch(&cfg, 9, 27), 14);
        assert_eq!(decision_epoch(&cfg, 27, 81), 41);
        assert_eq!(decision_epoch(&cfg, 0, 81), 21);
    }

    #[test]
    fn pathfinder_choice_is_a_seeded_partition() {
        let live: Vec<TrialId> = (0..9).map(TrialId).collect();
        let (p1, c1) = choose_pathfinders(7, 2, 1, &live, 3);
        let (p2, c2) = choose_pathfinders(7, 2, 1, &live, 3);
        assert_eq!(p1, p2);
        assert_eq!(c1, c2);
        assert_eq!(p1.len(), 3);
        assert!(p1.windows(2).all(|w| w[0] < w[1]));
        let mut union = p1.clone();
        union.extend(c1.clone());
        union.sort();
        assert_eq!(union, live);

        // A different round re-rolls the split.
        let (p3, _) = choose_pathfinders(7, 2, 2, &live, 3);
        let (p4, _) = choose_pathfinders(8, 2, 1, &live, 3);
        assert!(p3 != p1 || p4 != p1, "distinct keys should reshuffle");
    }

    #[test]
    fn disabled_predictor_reproduces_hyperband_exactly() {
        let curves = vec![
            vec![0.9, 0.8, 0.7, 0.6],
            vec![0.5, 0.45, 0.44, 0.43],
            vec![0.8, 0.3, 0.2, 0.1],
            vec![0.7, 0.75, 0.76, 0.77],
            vec![0.6, 0.55, 0.5, 0.45],
            vec![0.9, 0.85, 0.8, 0.2],
            vec![0.3, 0.6, 0.7, 0.8],
            vec![0.5, 0.4, 0.35, 0.33],
            vec![0.6, 0.5, 0.4, 0.30],
            vec![0.7, 0.6, 0.5, 0.50],
        ];
        let cfg = base_cfg(4, 2, PredictorKind::Disabled);
        let mut b1 = ScriptedBackend::minimize(curves.clone(), 4);
        let swift = run_swift_hyperband(&cfg, &mut b1).unwrap();
        let mut b2 = ScriptedBackend::minimize(curves, 4);
        let classic = run_hyperband(&cfg, &mut b2).unwrap();

        assert_eq!(swift.winner, classic.winner);
        assert_eq!(swift.best_metric, classic.best_metric);
        assert_eq!(swift.trials, classic.trials);
        assert_eq!(swift.ledger.total(), classic.ledger.total());
        for t in &swift.trials {
            assert_eq!(swift.ledger.of_trial(t.id), classic.ledger.of_trial(t.id));
        }
    }

    /// With R = 9, eta = 3 exactly one round is wide and long enough for a
    /// decision point: the five-trial round of the middle bracket. An
    /// oracle predictor must terminate exactly the candidates whose true
    /// round-end value is strictly worse than the pathfinder threshold.
    #[test]
    fn oracle_terminations_match_first_principles() {
        let mut curves: Vec<Vec<f64>> = Vec::new();
        // Bracket s=2: nine trials. Give them distinct, orderly curves.
        for i in 0..9 {
            let base = 0.2 + i as f64 * 0.05;
            curves.push((1..=9).map(|e| base + 0.5 / e as f64).collect());
        }
        // Bracket s=1: five trials with varied finals at epoch 3.
        for i in 0..5 {
            let base = 0.1 + i as f64 * 0.2;
            curves.push((1..=9).map(|e| base + 0.3 / e as f64).collect());
        }
        // Bracket s=0: three trials.
        for i in 0..3 {
            let base = 0.15 + i as f64 * 0.1;
            curves.push((1..=9).map(|e| base + 0.2 / e as f64).collect());
        }
        let cfg = SchedulerConfig {
            threshold_quantile: 1.0, // worst pathfinder
            ..base_cfg(9, 3, PredictorKind::Oracle)
        };

        let mut backend = ScriptedBackend::minimize(curves.clone(), 9);
        let outcome = run_swift_hyperband(&cfg, &mut backend).unwrap();

        // Recompute the expected terminations from first principles.
        let live: Vec<TrialId> = (9..14).map(TrialId).collect();
        let (pathfinders, candidates) = choose_pathfinders(cfg.seed, 1, 0, &live, 2);
        let final_of = |id: TrialId| curves[id.0 as usize][2]; // epoch 3
        let threshold = pathfinders.iter().map(|&p| final_of(p)).fold(f64::MIN, f64::max);
        let expected_terminated: Vec<TrialId> = candidates
            .iter()
            .copied()
            .filter(|&id| final_of(id) > threshold)
            .collect();

        assert_eq!(
            outcome.ids_with_status(TrialStatus::TerminatedByPredictor),
            expected_terminated
        );
        // Terminated candidates paid exactly one epoch (the decision epoch
        // of round 0 in that bracket).
        for &id in &expected_terminated {
            assert_eq!(outcome.ledger.of_trial(id), 1);
        }
        // Every skipped epoch is visible in the total: each terminated
        // candidate saves the rest of its three-epoch round.
        let expected_total =
            planned_epochs(9, 3).unwrap() - 2 * expected_terminated.len() as u64;
        assert_eq!(outcome.ledger.total(), expected_total);
        assert_eq!(outcome.ledger.recount(), expected_total);
    }

    #[test]
    fn tied_predictions_always_survive() {
        // All curves identical: the oracle predicts exactly the threshold
        // for every candidate, so nobody is terminated and the epoch bill
        // matches classic Hyperband.
        let curves = vec![vec![0.5; 9]; 17];
        let cfg = base_cfg(9, 3, PredictorKind::Oracle);
        let mut backend = ScriptedBackend::minimize(curves, 9);
        let outcome = run_swift_hyperband(&cfg, &mut backend).unwrap();
        assert!(outcome
            .ids_with_status(TrialStatus::TerminatedByPredictor)
            .is_empty());
        assert_eq!(
            outcome.ledger.total(),
            planned_epochs(9, 3).unwrap()
        );
    }

    #[test]
    fn svr_and_qsvr_runs_are_deterministic() {
        let spec = SyntheticSpec {
            rows: 60,
            target_epoch: 9,
            ..SyntheticSpec::default()
        };
        let dataset = generate_synthetic(&spec, 3).unwrap();
        for kind in [PredictorKind::Svr, PredictorKind::Qsvr] {
            let run = |seed: u64| {
                let mut backend =
                    ReplayBackend::new(&dataset, DrawMode::WithoutReplacement, seed);
                let cfg = SchedulerConfig {
                    min_predictor_samples: 2,
                    seed,
                    ..base_cfg(9, 3, kind)
                };
                run_swift_hyperband(&cfg, &mut backend).unwrap()
            };
            let a = run(5);
            let b = run(5);
            assert_eq!(a.winner, b.winner, "{kind:?}");
            assert_eq!(a.trials, b.trials, "{kind:?}");
            assert_eq!(a.ledger.total(), b.ledger.total(), "{kind:?}");
            // The winner finished its full budget.
            let winner = a.trials.iter().find(|t| t.id == a.winner).unwrap();
            assert_eq!(winner.status, TrialStatus::Completed);
            assert_eq!(winner.curve.len(), 9);
        }
    }

    #[test]
    fn terminations_never_exceed_hyperband_budget() {
        let spec = SyntheticSpec {
            rows: 60,
            target_epoch: 9,
            ..SyntheticSpec::default()
        };
        let dataset = generate_synthetic(&spec, 9).unwrap();
        let hb = planned_epochs(9, 3).unwrap();
        for kind in [
            PredictorKind::Disabled,
            PredictorKind::Oracle,
            PredictorKind::Svr,
        ] {
            let mut backend = ReplayBackend::new(&dataset, DrawMode::WithoutReplacement, 2);
            let cfg = SchedulerConfig {
                min_predictor_samples: 2,
                ..base_cfg(9, 3, kind)
            };
            let outcome = run_swift_hyperband(&cfg, &mut backend).unwrap();
            assert!(outcome.ledger.total() <= hb, "{kind:?}");
            let terminated = outcome.ids_with_status(TrialStatus::TerminatedByPredictor);
            assert_eq!(
                outcome.ledger.total(),
                outcome.ledger.recount(),
                "{kind:?}"
            );
            if kind == PredictorKind::Disabled {
                assert!(terminated.is_empty());
                assert_eq!(outcome.ledger.total(), hb);
            }
        }
    }
}
