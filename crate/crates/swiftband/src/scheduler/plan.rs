//! Bracket planning: which trial counts train to which cumulative epoch
//! budgets, across all brackets of one search.
//!
//! For a maximum per-trial budget `R` and elimination factor `η`, the plan
//! runs brackets `s = s_max .. 0` where `s_max` is the largest integer with
//! `η^s_max ≤ R`. Bracket `s` starts `n = ⌈(s_max+1)·η^s / (s+1)⌉` trials
//! and runs `s+1` rounds; round `i` trains `nᵢ = ⌊n/ηⁱ⌋` trials to the
//! cumulative budget `rᵢ = ⌊R/η^(s-i)⌋`. Everything is exact integer
//! arithmetic — no logarithms, no floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One elimination stage of a bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSpec {
    /// Trials that enter the round.
    pub n: u32,
    /// Cumulative epoch budget every surviving trial reaches by round end.
    pub budget: u32,
}

/// All rounds of one bracket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketPlan {
    /// Bracket index; higher means more exploration (more trials, smaller
    /// initial budget).
    pub s: u32,
    pub rounds: Vec<RoundSpec>,
}

impl BracketPlan {
    /// Trials drawn when the bracket starts.
    pub fn initial_trials(&self) -> u32 {
        self.rounds[0].n
    }

    /// Planned survivor count after round `i`: the next round's trial count,
    /// or `nᵢ/η` (integer division) after the final round.
    pub fn keep_after(&self, i: usize, eta: u32) -> u32 {
        match self.rounds.get(i + 1) {
            Some(next) => next.n,
            None => self.rounds[i].n / eta,
        }
    }

    /// Epochs this bracket consumes if no trial is terminated early:
    /// round `i` trains `nᵢ` trials from the previous budget to `rᵢ`.
    pub fn planned_epochs(&self) -> u64 {
        let mut total = 0u64;
        let mut prev = 0u32;
        for round in &self.rounds {
            total += round.n as u64 * (round.budget - prev) as u64;
            prev = round.budget;
        }
        total
    }
}

/// Plans every bracket for budget `R` and elimination factor `η`.
pub fn plan_brackets(r_max: u32, eta: u32) -> Result<Vec<BracketPlan>> {
    if eta < 2 {
        return Err(Error::Config(format!(
            "elimination factor must be at least 2, got {eta}"
        )));
    }
    if r_max < eta {
        return Err(Error::Config(format!(
            "max budget {r_max} must be at least the elimination factor {eta}"
        )));
    }

    // Largest s with η^s ≤ R, and η^s alongside it.
    let mut s_max = 0u32;
    let mut eta_pow_smax = 1u64;
    while eta_pow_smax * eta as u64 <= r_max as u64 {
        eta_pow_smax *= eta as u64;
        s_max += 1;
    }

    let mut brackets = Vec::with_capacity(s_max as usize + 1);
    let mut eta_pow_s = eta_pow_smax;
    for s in (0..=s_max).rev() {
        let n = ((s_max as u64 + 1) * eta_pow_s).div_ceil(s as u64 + 1);
        let mut rounds = Vec::with_capacity(s as usize + 1);
        let mut divisor_n = 1u64; // η^i
        let mut divisor_r = eta_pow_s; // η^(s-i)
        for _ in 0..=s {
            rounds.push(RoundSpec {
                n: (n / divisor_n) as u32,
                budget: (r_max as u64 / divisor_r) as u32,
            });
            divisor_n *= eta as u64;
            divisor_r /= eta as u64;
        }
        brackets.push(BracketPlan { s, rounds });
        eta_pow_s /= eta as u64;
    }
    Ok(brackets)
}

/// Total epochs the whole plan consumes without early termination.
pub fn planned_total_epochs(brackets: &[BracketPlan]) -> u64 {
    brackets.iter().map(BracketPlan::planned_epochs).sum()
}

/// Plans the schedule for (`r_max`, `eta`) and totals its epochs.
pub fn planned_epochs(r_max: u32, eta: u32) -> Result<u64> {
    Ok(planned_total_epochs(&plan_brackets(r_max, eta)?))
}
