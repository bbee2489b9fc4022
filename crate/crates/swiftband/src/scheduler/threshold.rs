//! Predictor-threshold baseline: no brackets, one decision per trial.
//!
//! The baseline measures what a performance predictor is worth on its own,
//! without successive halving around it. It trains `baseline_full` trials
//! to the full budget, fits a single predictor from their early curves to
//! their final values, then draws `baseline_partial` fresh trials, trains
//! each only to the observation epoch, and completes exactly those whose
//! predicted final value is strictly better than a quantile of the full
//! runs. Everything else is terminated at the observation epoch.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::domain::{compare_metric, Trial, TrialId};
use crate::error::{Error, Result};
use crate::predictor::{features_from_curve, train_qsvr, train_svr, SvrModel};

use super::pool::{mix_seed, PredictorKind};
use super::runner::TrialBackend;
use super::{
    draw_trials, finish_outcome, quantile_threshold, train_to, EpochLedger, RunOutcome,
    SchedulerConfig,
};

/// Runs the threshold baseline against `backend`.
///
/// Requires `baseline_partial > baseline_full >= max(2,
/// min_predictor_samples)`, a non-disabled predictor, and an observation
/// epoch strictly below the budget.
pub fn run_threshold_search(
    cfg: &SchedulerConfig,
    backend: &mut dyn TrialBackend,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let r = cfg.resolve_r(backend.target_epoch())?;
    let m = cfg.baseline_full;
    let n = cfg.baseline_partial;
    if m < 2 || n <= m {
        return Err(Error::Config(format!(
            "threshold search needs baseline_partial > baseline_full >= 2, got {n} and {m}"
        )));
    }
    if cfg.predictor == PredictorKind::Disabled {
        return Err(Error::Config(
            "threshold search is pointless without a predictor; pick svr, qsvr or oracle"
                .into(),
        ));
    }
    if m < cfg.min_predictor_samples {
        return Err(Error::Config(format!(
            "baseline_full {m} is below min_predictor_samples {}",
            cfg.min_predictor_samples
        )));
    }
    let e_obs = (cfg.decision_fraction * r as f64).ceil() as u32;
    if e_obs >= r {
        return Err(Error::Config(format!(
            "observation epoch {e_obs} (decision_fraction {}) leaves no epochs to save \
             under budget {r}",
            cfg.decision_fraction
        )));
    }
    let direction = backend.metric_direction();

    let mut trials: BTreeMap<TrialId, Trial> = BTreeMap::new();
    let mut ledger = EpochLedger::new();

    // Stage 1: full-budget reference runs.
    let fulls = draw_trials(backend, &mut trials, m)?;
    let targets: Vec<_> = fulls.iter().map(|&id| (id, r)).collect();
    train_to(backend, &mut trials, &targets, &mut ledger)?;
    for &id in &fulls {
        trials.get_mut(&id).unwrap().complete();
    }

    // One predictor from observation-epoch features to final values.
    let space = backend.space();
    let target_epoch = backend.target_epoch() as usize;
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for &id in &fulls {
        let t = &trials[&id];
        let features =
            features_from_curve(&t.config, &t.curve.values, e_obs as usize, space, target_epoch)?;
        xs.push(features.0);
        ys.push(t.last_value().expect("full runs just completed"));
    }
    let model: Option<SvrModel> = match cfg.predictor {
        PredictorKind::Svr => train_svr(&xs, &ys, &cfg.svr).ok(),
        PredictorKind::Qsvr => train_qsvr(
            &xs,
            &ys,
            &cfg.svr,
            &cfg.qsvr,
            mix_seed(cfg.seed, &[u64::from(r), u64::from(e_obs)]),
        )
        .ok(),
        PredictorKind::Oracle => None,
        PredictorKind::Disabled => unreachable!("rejected above"),
    };
    let threshold = quantile_threshold(ys.clone(), cfg.threshold_quantile, direction);

    // Stage 2: short runs, one completion decision each.
    let partials = draw_trials(backend, &mut trials, n)?;
    let targets: Vec<_> = partials.iter().map(|&id| (id, e_obs)).collect();
    train_to(backend, &mut trials, &targets, &mut ledger)?;

    let mut selected = Vec::new();
    for &id in &partials {
        let prediction = match cfg.predictor {
            PredictorKind::Oracle => backend.true_value_at(id, r),
            _ => model.as_ref().and_then(|mdl| {
                let t = &trials[&id];
                let features = features_from_curve(
                    &t.config,
                    &t.curve.values,
                    e_obs as usize,
                    backend.space(),
                    target_epoch,
                )
                .ok()?;
                let value = mdl.predict(&features.0);
                value.is_finite().then_some(value)
            }),
        };
        // Complete only on a prediction strictly better than the
        // threshold; a missing prediction fails open.
        let complete = match prediction {
            Some(p) => matches!(compare_metric(p, threshold, direction), Ok(Ordering::Less)),
            None => true,
        };
        if complete {
            selected.push(id);
        } else {
            trials.get_mut(&id).unwrap().terminate_by_predictor();
        }
    }

    let targets: Vec<_> = selected.iter().map(|&id| (id, r)).collect();
    train_to(backend, &mut trials, &targets, &mut ledger)?;
    for &id in &selected {
        trials.get_mut(&id).unwrap().complete();
    }

    finish_outcome(trials, ledger, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, DrawMode, SyntheticSpec};
    use crate::domain::TrialStatus;
    use crate::scheduler::runner::ReplayBackend;
    use crate::scheduler::testutil::ScriptedBackend;

    fn cfg(m: usize, n: usize, kind: PredictorKind) -> SchedulerConfig {
        SchedulerConfig {
            r_max: Some(4),
            baseline_full: m,
            baseline_partial: n,
            min_predictor_samples: 2,
            predictor: kind,
            ..SchedulerConfig::default()
        }
    }

    /// M = 2 fulls, N = 3 partials, R = 4, observation at epoch 1,
    /// median threshold → the better full run's final value (0.4).
    #[test]
    fn hand_simulated_oracle_baseline() {
        let curves = vec![
            vec![0.5, 0.45, 0.42, 0.4], // t0: full, final 0.4 = threshold
            vec![0.6, 0.6, 0.6, 0.6],   // t1: full, final 0.6
            vec![0.9, 0.5, 0.4, 0.3],   // t2: true final 0.3 < 0.4 → completed
            vec![0.2, 0.3, 0.35, 0.4],  // t3: true final ties → terminated
            vec![0.4, 0.45, 0.48, 0.5], // t4: true final worse → terminated
        ];
        let mut backend = ScriptedBackend::minimize(curves, 4);
        let outcome =
            run_threshold_search(&cfg(2, 3, PredictorKind::Oracle), &mut backend).unwrap();

        assert_eq!(
            outcome.ids_with_status(TrialStatus::Completed),
            [0, 1, 2].map(TrialId).to_vec()
        );
        assert_eq!(
            outcome.ids_with_status(TrialStatus::TerminatedByPredictor),
            [3, 4].map(TrialId).to_vec()
        );
        assert_eq!(outcome.winner, TrialId(2));
        assert_eq!(outcome.best_metric, 0.3);
        // 2 fulls × 4 + 3 partials × 1 + 1 selected × 3 more.
        assert_eq!(outcome.ledger.total(), 14);
        assert_eq!(outcome.ledger.recount(), 14);
        assert_eq!(outcome.ledger.of_trial(TrialId(3)), 1);
        assert_eq!(outcome.ledger.of_trial(TrialId(4)), 1);
    }

    #[test]
    fn configuration_errors_are_loud() {
        let mk = |curves: usize| ScriptedBackend::minimize(vec![vec![0.1; 4]; curves], 4);
        // Too few fulls.
        let err = run_threshold_search(&cfg(1, 3, PredictorKind::Oracle), &mut mk(4)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // Partials must outnumber fulls.
        let err = run_threshold_search(&cfg(3, 3, PredictorKind::Oracle), &mut mk(6)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // A disabled predictor has nothing to decide with.
        let err =
            run_threshold_search(&cfg(2, 3, PredictorKind::Disabled), &mut mk(5)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // Too few fulls to train a model on.
        let mut config = cfg(3, 5, PredictorKind::Svr);
        config.min_predictor_samples = 5;
        let err = run_threshold_search(&config, &mut mk(8)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // An observation epoch at or past the budget saves nothing.
        let mut config = cfg(2, 3, PredictorKind::Oracle);
        config.decision_fraction = 0.9; // ⌈0.9·4⌉ = 4 = R
        let err = run_threshold_search(&config, &mut mk(5)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn svr_baseline_is_deterministic_and_accounts_epochs() {
        let spec = SyntheticSpec {
            rows: 40,
            target_epoch: 9,
            ..SyntheticSpec::default()
        };
        let dataset = generate_synthetic(&spec, 17).unwrap();
        let run = || {
            let mut backend = ReplayBackend::new(&dataset, DrawMode::WithoutReplacement, 3);
            let config = SchedulerConfig {
                r_max: Some(9),
                baseline_full: 10,
                baseline_partial: 20,
                min_predictor_samples: 2,
                predictor: PredictorKind::Svr,
                ..SchedulerConfig::default()
            };
            run_threshold_search(&config, &mut backend).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.ledger.total(), b.ledger.total());

        // e_obs = ⌈0.25 · 9⌉ = 3.
        let completed = a.ids_with_status(TrialStatus::Completed);
        let selected = completed.len() - 10;
        let expected: u64 = 10 * 9 + 20 * 3 + selected as u64 * 6;
        assert_eq!(a.ledger.total(), expected);
        // The winner really completed.
        let winner = a.trials.iter().find(|t| t.id == a.winner).unwrap();
        assert_eq!(winner.status, TrialStatus::Completed);
        assert_eq!(winner.curve.len(), 9);
    }

    #[test]
    fn rejected_trials_stop_at_the_observation_epoch() {
        let spec = SyntheticSpec {
            rows: 40,
            target_epoch: 9,
            ..SyntheticSpec::default()
        };
        let dataset = generate_synthetic(&spec, 29).unwrap();
        let mut backend = ReplayBackend::new(&dataset, DrawMode::WithoutReplacement, 8);
        let config = SchedulerConfig {
            r_max: Some(9),
            baseline_full: 5,
            baseline_partial: 15,
            min_predictor_samples: 2,
            predictor: PredictorKind::Oracle,
            ..SchedulerConfig::default()
        };
        let outcome = run_threshold_search(&config, &mut backend).unwrap();
        for t in &outcome.trials {
            match t.status {
                TrialStatus::Completed => assert_eq!(t.curve.len(), 9),
                TrialStatus::TerminatedByPredictor => assert_eq!(t.curve.len(), 3),
                other => panic!("unexpected status {other:?}"),
            }
        }
    }
}
