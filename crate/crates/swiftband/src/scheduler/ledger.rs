//! Exact accounting of training epochs consumed by a search run.

use std::collections::HashMap;

use crate::domain::TrialId;

/// Counts every epoch of target-model training a run performs, per trial
/// and in total. A trial trained from epoch `a` to epoch `b` adds exactly
/// `b - a`; totals never decrease.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpochLedger {
    total: u64,
    per_trial: HashMap<TrialId, u32>,
}

impl EpochLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a training segment `[from, to)`. The segment must extend the
    /// trial's previously recorded progress contiguously.
    pub fn record(&mut self, trial: TrialId, from: u32, to: u32) {
        assert!(from < to, "empty or reversed segment for {trial}");
        let entry = self.per_trial.entry(trial).or_insert(0);
        assert_eq!(
            *entry, from,
            "{trial} was at epoch {entry} but a segment starts at {from}"
        );
        *entry = to;
        self.total += (to - from) as u64;
    }

    /// Total epochs consumed so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Epochs consumed by one trial.
    pub fn of_trial(&self, trial: TrialId) -> u32 {
        self.per_trial.get(&trial).copied().unwrap_or(0)
    }

    /// Number of trials that consumed at least one epoch.
    pub fn trials_touched(&self) -> usize {
        self.per_trial.len()
    }

    /// Recomputes the total from the per-trial counters; always equals
    /// [`EpochLedger::total`].
    pub fn recount(&self) -> u64 {
        self.per_trial.values().map(|&e| e as u64).sum()
    }
}
