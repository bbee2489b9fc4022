//! Core vocabulary: search spaces, hyperparameter configurations, learning
//! curves, trials and metric comparison.
//!
//! Every scheduler in this crate works in terms of these types. A [`Trial`]
//! is one hyperparameter configuration together with the prefix of its
//! learning curve observed so far; schedulers only ever extend curves and
//! move trials through the status machine
//! `pending → running → {paused → running}* → terminal`.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether smaller or larger metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Smaller is better (losses, perplexity).
    Minimize,
    /// Larger is better (accuracy).
    Maximize,
}

/// The value domain of one hyperparameter dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HpDomain {
    /// Uniform over `[low, high]`.
    Continuous { low: f64, high: f64 },
    /// Log-uniform over `[low, high]`; both bounds must be positive.
    LogContinuous { low: f64, high: f64 },
    /// Uniform over the integers `low..=high`.
    Integer { low: i64, high: i64 },
    /// Uniform over a fixed list of named categories.
    Categorical { categories: Vec<String> },
}

/// One named dimension of a search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpDim {
    /// Dimension name, unique within its space.
    pub name: String,
    /// The dimension's value domain.
    #[serde(flatten)]
    pub domain: HpDomain,
}

/// An ordered list of hyperparameter dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    /// The dimensions, in configuration order.
    pub dims: Vec<HpDim>,
}

/// One sampled hyperparameter value.
///
/// Serialized with an explicit variant tag (`{"float": 0.25}`,
/// `{"int": 4}`, `{"cat": 2}`): a bare JSON number could not tell an
/// integer dimension from a categorical index back apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HpValue {
    /// Value of a continuous or log-continuous dimension.
    Float(f64),
    /// Value of an integer dimension.
    Int(i64),
    /// Index into a categorical dimension's category list.
    Cat(usize),
}

/// A full assignment of values to a search space, in dimension order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperparameterConfig {
    /// One value per dimension.
    pub values: Vec<HpValue>,
}

impl HpValue {
    /// The value as a plain float (categorical values map to their index).
    pub fn as_f64(&self) -> f64 {
        match *self {
            HpValue::Float(v) => v,
            HpValue::Int(v) => v as f64,
            HpValue::Cat(i) => i as f64,
        }
    }
}

impl SearchSpace {
    /// Builds a space and validates it: names unique and non-empty, numeric
    /// bounds ordered, log bounds positive, category lists non-empty.
    pub fn new(dims: Vec<HpDim>) -> Result<Self> {
        let space = SearchSpace { dims };
        space.validate()?;
        Ok(space)
    }

    /// Number of dimensions.
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    /// True when the space has no dimensions.
    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Checks the structural invariants of the space.
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("search space has no dimensions".into()));
        }
        for (i, dim) in self.dims.iter().enumerate() {
            if dim.name.trim().is_empty() {
                return Err(Error::Config(format!("dimension {i} has an empty name")));
            }
            if self.dims[..i].iter().any(|d| d.name == dim.name) {
                return Err(Error::Config(format!(
                    "duplicate dimension name `{}`",
                    dim.name
                )));
            }
            match &dim.domain {
                HpDomain::Continuous { low, high } => {
                    if !(low.is_finite() && high.is_finite() && low < high) {
                        return Err(Error::Config(format!(
                            "dimension `{}` needs finite bounds with low < high",
                            dim.name
                        )));
                    }
                }
                HpDomain::LogContinuous { low, high } => {
                    if !(low.is_finite() && high.is_finite() && *low > 0.0 && low < high) {
                        return Err(Error::Config(format!(
                            "log dimension `{}` needs 0 < low < high",
                            dim.name
                        )));
                    }
                }
                HpDomain::Integer { low, high } => {
                    if low >= high {
                        return Err(Error::Config(format!(
                            "integer dimension `{}` needs low < high",
                            dim.name
                        )));
                    }
                }
                HpDomain::Categorical { categories } => {
                    if categories.is_empty() {
                        return Err(Error::Config(format!(
                            "categorical dimension `{}` has no categories",
                            dim.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when `config` has one in-domain value of the right type per
    /// dimension.
    pub fn contains(&self, config: &HyperparameterConfig) -> bool {
        if config.values.len() != self.dims.len() {
            return false;
        }
        self.dims
            .iter()
            .zip(&config.values)
            .all(|(dim, value)| match (&dim.domain, value) {
                (HpDomain::Continuous { low, high }, HpValue::Float(v)) => {
                    *v >= *low && *v <= *high
                }
                (HpDomain::LogContinuous { low, high }, HpValue::Float(v)) => {
                    *v >= *low && *v <= *high
                }
                (HpDomain::Integer { low, high }, HpValue::Int(v)) => *v >= *low && *v <= *high,
                (HpDomain::Categorical { categories }, HpValue::Cat(i)) => *i < categories.len(),
                _ => false,
            })
    }

    /// Maps one value of dimension `dim` onto `[0, 1]`.
    ///
    /// Continuous and integer dimensions are min-max scaled, log-continuous
    /// dimensions are scaled in log space, and a categorical value becomes
    /// `index / (category_count - 1)` (0 for a single-category dimension).
    pub fn normalize(&self, dim: usize, value: &HpValue) -> f64 {
        match (&self.dims[dim].domain, value) {
            (HpDomain::Continuous { low, high }, HpValue::Float(v)) => (v - low) / (high - low),
            (HpDomain::LogContinuous { low, high }, HpValue::Float(v)) => {
                (v.ln() - low.ln()) / (high.ln() - low.ln())
            }
            (HpDomain::Integer { low, high }, HpValue::Int(v)) => {
                (v - low) as f64 / (high - low) as f64
            }
            (HpDomain::Categorical { categories }, HpValue::Cat(i)) => {
                if categories.len() == 1 {
                    0.0
                } else {
                    *i as f64 / (categories.len() - 1) as f64
                }
            }
            _ => f64::NAN,
        }
    }

    /// Parses a numeric cell (as stored in dataset files) back into a typed
    /// value for dimension `dim`.
    pub fn value_from_f64(&self, dim: usize, raw: f64) -> Result<HpValue> {
        match &self.dims[dim].domain {
            HpDomain::Continuous { .. } | HpDomain::LogContinuous { .. } => {
                Ok(HpValue::Float(raw))
            }
            HpDomain::Integer { .. } => Ok(HpValue::Int(raw.round() as i64)),
            HpDomain::Categorical { categories } => {
                let idx = raw.round();
                if idx < 0.0 || idx >= categories.len() as f64 {
                    Err(Error::Config(format!(
                        "category index {raw} out of range for `{}`",
                        self.dims[dim].name
                    )))
                } else {
                    Ok(HpValue::Cat(idx as usize))
                }
            }
        }
    }
}

/// Draws one uniform configuration from `space`.
///
/// Log-continuous dimensions are sampled uniformly in log space, so e.g. a
/// learning-rate dimension over `[1e-5, 1e-1]` lands in `[1e-5, 1e-3]` half
/// of the time.
pub fn sample_config<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> HyperparameterConfig {
    let values = space
        .dims
        .iter()
        .map(|dim| match &dim.domain {
            HpDomain::Continuous { low, high } => HpValue::Float(rng.random_range(*low..=*high)),
            HpDomain::LogContinuous { low, high } => {
                HpValue::Float(rng.random_range(low.ln()..=high.ln()).exp())
            }
            HpDomain::Integer { low, high } => HpValue::Int(rng.random_range(*low..=*high)),
            HpDomain::Categorical { categories } => {
                HpValue::Cat(rng.random_range(0..categories.len()))
            }
        })
        .collect();
    HyperparameterConfig { values }
}

/// Compares two metric values under `direction`.
///
/// Returns `Ordering::Less` when `a` is strictly better than `b` and errors
/// on non-finite input, so silent NaN propagation cannot corrupt a schedule.
pub fn compare_metric(a: f64, b: f64, direction: Direction) -> Result<Ordering> {
    if !a.is_finite() {
        return Err(Error::NonFinite(a));
    }
    if !b.is_finite() {
        return Err(Error::NonFinite(b));
    }
    let ord = match direction {
        Direction::Minimize => a.total_cmp(&b),
        Direction::Maximize => b.total_cmp(&a),
    };
    Ok(ord)
}

/// Identifier of a trial, unique within one scheduler run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TrialId(pub u64);

impl std::fmt::Display for TrialId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Lifecycle state of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    /// Drawn, not yet trained.
    Pending,
    /// Currently training.
    Running,
    /// Between training segments, waiting for a scheduler decision.
    Paused,
    /// Stopped early because a performance predictor judged it worse than
    /// the round's threshold.
    TerminatedByPredictor,
    /// Dropped by a round-end elimination.
    EliminatedByRound,
    /// Reached its final scheduled epoch.
    Completed,
}

impl TrialStatus {
    /// True for the three end states.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TrialStatus::TerminatedByPredictor
                | TrialStatus::EliminatedByRound
                | TrialStatus::Completed
        )
    }
}

/// The observed metric values of one trial, epoch 1 upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    /// Name of the tracked metric.
    pub metric_name: String,
    /// Whether smaller or larger values are better.
    pub direction: Direction,
    /// `values[e - 1]` is the metric after epoch `e`.
    pub values: Vec<f64>,
}

impl LearningCurve {
    /// An empty curve for `metric_name` under `direction`.
    pub fn empty(metric_name: impl Into<String>, direction: Direction) -> Self {
        LearningCurve {
            metric_name: metric_name.into(),
            direction,
            values: Vec::new(),
        }
    }

    /// Number of observed epochs.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when no epoch has been observed yet.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Metric value after epoch `epoch` (1-based), if observed.
    pub fn value_at(&self, epoch: usize) -> Option<f64> {
        if epoch == 0 {
            return None;
        }
        self.values.get(epoch - 1).copied()
    }

    /// The most recent observed value.
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// One hyperparameter configuration with its observed learning-curve prefix
/// and lifecycle status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Run-unique identifier.
    pub id: TrialId,
    /// The configuration under evaluation.
    pub config: HyperparameterConfig,
    /// Observed metric values so far.
    pub curve: LearningCurve,
    /// Current lifecycle state.
    pub status: TrialStatus,
}

impl Trial {
    /// A freshly drawn, untrained trial.
    pub fn new(id: TrialId, config: HyperparameterConfig, curve: LearningCurve) -> Self {
        Trial {
            id,
            config,
            curve,
            status: TrialStatus::Pending,
        }
    }

    /// Marks the trial as training. Valid from `Pending` and `Paused`.
    pub fn begin_training(&mut self) {
        assert!(
            matches!(self.status, TrialStatus::Pending | TrialStatus::Paused),
            "begin_training on {} in state {:?}",
            self.id,
            self.status
        );
        self.status = TrialStatus::Running;
    }

    /// Appends newly observed epochs. Valid only while `Running`; values
    /// must be finite and the curve only ever grows.
    pub fn record_segment(&mut self, segment: &[f64]) -> Result<()> {
        assert!(
            self.status == TrialStatus::Running,
            "record_segment on {} in state {:?}",
            self.id,
            self.status
        );
        for &v in segment {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
        }
        self.curve.values.extend_from_slice(segment);
        Ok(())
    }

    /// Parks the trial between scheduler decisions. Valid from `Running`.
    pub fn pause(&mut self) {
        assert!(
            self.status == TrialStatus::Running,
            "pause on {} in state {:?}",
            self.id,
            self.status
        );
        self.status = TrialStatus::Paused;
    }

    /// Early-stops the trial on a predictor decision.
    pub fn terminate_by_predictor(&mut self) {
        self.into_terminal(TrialStatus::TerminatedByPredictor);
    }

    /// Drops the trial in a round-end elimination.
    pub fn eliminate_by_round(&mut self) {
        self.into_terminal(TrialStatus::EliminatedByRound);
    }

    /// Marks the trial fully trained.
    pub fn complete(&mut self) {
        self.into_terminal(TrialStatus::Completed);
    }

    fn into_terminal(&mut self, terminal: TrialStatus) {
        assert!(
            matches!(self.status, TrialStatus::Running | TrialStatus::Paused),
            "transition to {:?} on {} in state {:?}",
            terminal,
            self.id,
            self.status
        );
        self.status = terminal;
    }

    /// Most recent observed metric value.
    pub fn last_value(&self) -> Option<f64> {
        self.curve.last()
    }
}

/// Picks the best trial by last observed value; ties go to the lowest id.
///
/// Trials without any observed epoch are skipped; errors when no trial has
/// an observation.
pub fn best_trial<'a>(
    trials: impl IntoIterator<Item = &'a Trial>,
    direction: Direction,
) -> Result<&'a Trial> {
    let mut best: Option<&Trial> = None;
    for trial in trials {
        let Some(value) = trial.last_value() else {
            continue;
        };
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        best = Some(match best {
            None => trial,
            Some(current) => {
                let cur_value = current.last_value().expect("best always has a value");
                match compare_metric(value, cur_value, direction)? {
                    Ordering::Less => trial,
                    Ordering::Greater => current,
                    Ordering::Equal => {
                        if trial.id < current.id {
                            trial
                        } else {
                            current
                        }
                    }
                }
            }
        });
    }
    best.ok_or_else(|| Error::Numeric("no trial has an observed metric value".into()))
}
