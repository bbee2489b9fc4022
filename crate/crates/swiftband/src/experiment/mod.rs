//! Multi-run experiment driver: run each algorithm `n` times on one
//! dataset, paired by seed, and report best-found metrics and epoch costs.
//!
//! Pairing is the point: run `i` of *every* algorithm uses seed
//! `base_seed + i`, and identically seeded replay backends draw identical
//! dataset rows, so per-seed comparisons ("did the predictor-assisted run
//! beat plain successive halving on the same trials?") are meaningful.
//! Epochs are the resource unit — each run's reported total comes from its
//! scheduler's epoch ledger and is checked against the sum of trained curve
//! lengths before it enters the report. Wall time is recorded alongside but
//! never used in any determinism or acceptance comparison.

pub mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    generate_synthetic, load_dataset, DrawMode, LearningCurveDataset, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::scheduler::{
    plan_brackets, run_algorithm, Algorithm, ReplayBackend, SchedulerConfig,
};

pub use report::{
    emit_plot_data, emit_report, parse_report, summarize, write_report_files, AlgorithmSummary,
    ExperimentReport, ReportFormat, RunRecord, REPORT_COLUMNS,
};

/// Where the experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Load `<path>.curves.csv` + `<path>.meta.json`.
    Path { path: String },
    /// Generate a synthetic dataset in memory.
    Synthetic {
        #[serde(default)]
        spec: SyntheticSpec,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSource {
    /// Loads or generates the dataset.
    pub fn materialize(&self) -> Result<LearningCurveDataset> {
        match self {
            DatasetSource::Path { path } => load_dataset(path),
            DatasetSource::Synthetic { spec, seed } => generate_synthetic(spec, *seed),
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_runs() -> usize {
    10
}

fn default_draw_mode() -> DrawMode {
    DrawMode::WithoutReplacement
}

/// Full description of one experiment, loadable from a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Algorithms to compare; every one sees the same seeds.
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_runs")]
    pub runs_per_algorithm: usize,
    /// Run `i` of each algorithm uses seed `base_seed + i`.
    #[serde(default)]
    pub base_seed: u64,
    /// Scheduler settings shared by all algorithms…
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    /// …unless an algorithm has its own full configuration here.
    #[serde(default)]
    pub overrides: BTreeMap<Algorithm, SchedulerConfig>,
    /// How runs draw dataset rows. The default draws each row at most once
    /// per run, so a run never resumes a trial it already finished.
    #[serde(default = "default_draw_mode")]
    pub draw_mode: DrawMode,
    /// Where the report files go; `None` keeps the report in memory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A minimal configuration for `dataset` with library defaults.
    pub fn new(dataset: DatasetSource) -> Self {
        ExperimentConfig {
            dataset,
            algorithms: default_algorithms(),
            runs_per_algorithm: default_runs(),
            base_seed: 0,
            scheduler: SchedulerConfig::default(),
            overrides: BTreeMap::new(),
            draw_mode: default_draw_mode(),
            output_dir: None,
        }
    }

    /// Reads a configuration from a JSON file.
    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The scheduler configuration used for `algorithm`.
    pub fn scheduler_for(&self, algorithm: Algorithm) -> &SchedulerConfig {
        self.overrides.get(&algorithm).unwrap_or(&self.scheduler)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_algorithm == 0 {
            return Err(Error::Config("runs_per_algorithm must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm must run".into()));
        }
        self.scheduler.validate()?;
        for cfg in self.overrides.values() {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Dataset rows one run of `algorithm` claims when every row is drawn at
/// most once: all brackets' initial trials for the bracket-based searches,
/// or the full + partial counts for the threshold baseline.
pub fn required_rows(
    algorithm: Algorithm,
    cfg: &SchedulerConfig,
    target_epoch: u32,
) -> Result<usize> {
    match algorithm {
        Algorithm::ThresholdSearch => Ok(cfg.baseline_full + cfg.baseline_partial),
        Algorithm::Hyperband | Algorithm::Fast | Algorithm::SwiftSvr | Algorithm::SwiftQsvr => {
            let r = cfg.resolve_r(target_epoch)?;
            let brackets = plan_brackets(r, cfg.eta)?;
            Ok(brackets.iter().map(|b| b.initial_trials() as usize).sum())
        }
    }
}

/// Runs every (algorithm, seed) pair and assembles the report.
///
/// Fully deterministic given the configuration, apart from the recorded
/// wall times. Does not write any files — pair with
/// [`write_report_files`] for that.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dataset = cfg.dataset.materialize()?;
    dataset.validate()?;
    let target = dataset.meta.target_epoch as u32;

    if cfg.draw_mode == DrawMode::WithoutReplacement {
        for &algorithm in &cfg.algorithms {
            let required = required_rows(algorithm, cfg.scheduler_for(algorithm), target)?;
            if dataset.len() < required {
                return Err(Error::Config(format!(
                    "dataset has {} rows but one {algorithm} run draws {required}",
                    dataset.len()
                )));
            }
        }
    }

    let mut records = Vec::with_capacity(cfg.algorithms.len() * cfg.runs_per_algorithm);
    for &algorithm in &cfg.algorithms {
        for run in 0..cfg.runs_per_algorithm {
            let seed = cfg.base_seed + run as u64;
            let mut scheduler = cfg.scheduler_for(algorithm).clone();
            scheduler.seed = seed;
            let mut backend = ReplayBackend::new(&dataset, cfg.draw_mode, seed);
            let started = Instant::now();
            let outcome = run_algorithm(algorithm, &scheduler, &mut backend)?;
            let wall_time_ms = started.elapsed().as_millis() as u64;

            // Conservation: the ledger total must equal the epochs the
            // trials actually hold.
            let trained: u64 = outcome.trials.iter().map(|t| t.curve.len() as u64).sum();
            if trained != outcome.ledger.total() {
                return Err(Error::Numeric(format!(
                    "epoch conservation violated in {algorithm} run {run}: \
                     ledger says {}, trials hold {trained}",
                    outcome.ledger.total()
                )));
            }

            records.push(RunRecord {
                algorithm,
                run,
                seed,
                winner: outcome.winner.0,
                best_metric: outcome.best_metric,
                epochs: outcome.ledger.total(),
                wall_time_ms,
            });
        }
    }

    Ok(ExperimentReport::new(
        dataset.meta.metric_name.clone(),
        dataset.meta.direction,
        records,
    ))
}
