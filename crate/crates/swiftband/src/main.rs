//! Command-line front end: dataset generation, single-machine experiment
//! simulation, predictor evaluation, the distributed coordinator/worker
//! pair, and report re-printing.
//!
//! Exit codes are a stable contract for scripting:
//!
//! * `0` — success;
//! * `1` — runtime failure (unreadable files, insufficient data, network
//!   or task failures);
//! * `2` — usage or configuration error (bad flags, semantically invalid
//!   settings), detected before any real work starts.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swiftband::data::{
    generate_synthetic, load_dataset, save_dataset, DatasetMeta, DrawMode, SyntheticSpec,
};
use swiftband::dist::{
    run_worker, Coordinator, CoordinatorSource, CoordinatorTimeouts, WorkerBacking, WorkerConfig,
};
use swiftband::domain::Direction;
use swiftband::experiment::{
    parse_report, run_experiment, write_report_files, DatasetSource, ExperimentConfig,
    ExperimentReport, ReportFormat, RunRecord,
};
use swiftband::predictor::{
    features_from_curve, r_squared, train_qsvr, train_svr, QsvrParams, SvrParams,
};
use swiftband::scheduler::{Algorithm, SchedulerConfig};
use swiftband::Error;

/// Seed used when a command generates the default in-memory dataset.
const DEFAULT_DATA_SEED: u64 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenerateData(args) => cmd_generate_data(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::PredictEval(args) => cmd_predict_eval(args),
        Command::Coordinator(args) => cmd_coordinator(args),
        Command::Worker(args) => cmd_worker(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}

/// A command failure tagged with the exit code it maps to.
enum Failure {
    /// The invocation itself is wrong; nothing was attempted. Exit 2.
    Usage(Error),
    /// The work started and failed. Exit 1.
    Runtime(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(Error::Config(msg.into()))
}

type CmdResult = std::result::Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "swiftband",
    version,
    about = "Hyperband-family hyperparameter search with early-termination predictors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic learning-curve dataset on disk.
    GenerateData(GenerateDataArgs),
    /// Compare search algorithms over many seeded runs and write a report.
    Simulate(SimulateArgs),
    /// Score a predictor's held-out accuracy on one dataset.
    PredictEval(PredictEvalArgs),
    /// Run one search distributed across TCP workers and write its report.
    Coordinator(CoordinatorArgs),
    /// Serve training tasks to a coordinator.
    Worker(WorkerArgs),
    /// Re-print the summary of a previously written report file.
    Report(ReportArgs),
}

// ---------------------------------------------------------------------------
// generate-data

#[derive(Args)]
struct GenerateDataArgs {
    /// Directory receiving `<name>.curves.csv` and `<name>.meta.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Base file name for the pair.
    #[arg(long, default_value = "synthetic")]
    name: String,
    /// Rows (distinct configurations) to record.
    #[arg(long, default_value_t = 200)]
    rows: usize,
    /// Epochs per learning curve.
    #[arg(long, default_value_t = 81)]
    epochs: usize,
    /// Hyperparameter dimensions, each continuous over [0, 1].
    #[arg(long, default_value_t = 3)]
    hp_dim: usize,
    /// Standard deviation of the per-epoch Gaussian noise.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Generation seed.
    #[arg(long, default_value_t = DEFAULT_DATA_SEED)]
    seed: u64,
}

fn cmd_generate_data(a: GenerateDataArgs) -> CmdResult {
    if a.rows == 0 {
        return Err(usage("--rows must be at least 1"));
    }
    if a.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    if a.hp_dim == 0 {
        return Err(usage("--hp-dim must be at least 1"));
    }
    if !(a.noise.is_finite() && a.noise >= 0.0) {
        return Err(usage(format!("--noise must be finite and >= 0, got {}", a.noise)));
    }
    let spec = SyntheticSpec {
        rows: a.rows,
        hp_dim: a.hp_dim,
        target_epoch: a.epochs,
        noise_sigma: a.noise,
        ..SyntheticSpec::default()
    };
    let dataset = generate_synthetic(&spec, a.seed)?;
    let base = a.out.join(&a.name);
    save_dataset(&dataset, &base)?;
    println!(
        "wrote {} rows with {} epochs each",
        dataset.len(),
        dataset.meta.target_epoch
    );
    println!("curves: {}", base.with_extension("curves.csv").display());
    println!("meta:   {}", base.with_extension("meta.json").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
struct SimulateArgs {
    /// Experiment configuration file (JSON); omitted, defaults cover
    /// every field and the run uses an in-memory synthetic dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithms to run (overrides the config).
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Runs per algorithm (overrides the config).
    #[arg(long)]
    runs: Option<usize>,
    /// First seed; run i of every algorithm uses base_seed + i.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Replay dataset path (overrides the config's dataset).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory for report.json, report.csv and plotdata.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(Error::from)?;
            cfg
        }
        None => ExperimentConfig::new(DatasetSource::Synthetic {
            spec: SyntheticSpec::default(),
            seed: DEFAULT_DATA_SEED,
        }),
    };
    if let Some(names) = &a.algorithms {
        let mut algorithms = Vec::with_capacity(names.len());
        for name in names {
            algorithms.push(name.parse::<Algorithm>().map_err(Failure::Usage)?);
        }
        cfg.algorithms = algorithms;
    }
    if let Some(runs) = a.runs {
        cfg.runs_per_algorithm = runs;
    }
    if let Some(seed) = a.base_seed {
        cfg.base_seed = seed;
    }
    if let Some(path) = &a.dataset {
        cfg.dataset = DatasetSource::Path {
            path: path.display().to_string(),
        };
    }
    if let Some(out) = &a.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate().map_err(Failure::Usage)?;

    let report = run_experiment(&cfg)?;
    let out_dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("swiftband-out"));
    let files = write_report_files(&report, &out_dir)?;
    print_summary(&report);
    println!("report files:");
    for file in &files {
        println!("  {}", file.display());
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "metric: {} ({})",
        report.metric_name,
        match report.direction {
            Direction::Minimize => "lower is better",
            Direction::Maximize => "higher is better",
        }
    );
    for s in &report.summaries {
        println!(
            "{:>16}: mean {} {:.6} (best {:.6}, worst {:.6}), mean epochs {:.1} (min {}, max {}) over {} runs",
            s.algorithm.name(),
            report.metric_name,
            s.metric_mean,
            s.metric_best,
            s.metric_worst,
            s.epochs_mean,
            s.epochs_min,
            s.epochs_max,
            s.runs,
        );
    }
}

// ---------------------------------------------------------------------------
// predict-eval

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalKind {
    Svr,
    Qsvr,
    Oracle,
}

impl EvalKind {
    fn name(self) -> &'static str {
        match self {
            EvalKind::Svr => "svr",
            EvalKind::Qsvr => "qsvr",
            EvalKind::Oracle => "oracle",
        }
    }
}

#[derive(Args)]
struct PredictEvalArgs {
    /// Replay dataset path; omitted, the default synthetic dataset is
    /// generated in memory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Seed for the in-memory default dataset (ignored with --dataset).
    #[arg(long, default_value_t = DEFAULT_DATA_SEED)]
    data_seed: u64,
    /// Fraction of the full budget observed before predicting, in (0, 1).
    #[arg(long, default_value_t = 0.25)]
    fraction: f64,
    /// Predictor to evaluate.
    #[arg(long, value_enum, default_value_t = EvalKind::Svr)]
    kind: EvalKind,
    /// Seed for the 80/20 train/test split (and the annealer with qsvr).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_predict_eval(a: PredictEvalArgs) -> CmdResult {
    if !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(usage(format!(
            "--fraction must be strictly between 0 and 1, got {}",
            a.fraction
        )));
    }
    let dataset = match &a.dataset {
        Some(path) => load_dataset(path)?,
        None => generate_synthetic(&SyntheticSpec::default(), a.data_seed)?,
    };
    let target = dataset.meta.target_epoch;
    let feature_epoch = ((a.fraction * target as f64).ceil() as usize).max(1);
    if feature_epoch >= target {
        return Err(usage(format!(
            "--fraction {} observes epoch {feature_epoch} of {target}; nothing is left to predict",
            a.fraction
        )));
    }

    let n = dataset.len();
    let n_test = (n / 5).max(1);
    let n_train = n.saturating_sub(n_test);
    if n_train < 2 || n_test < 2 {
        return Err(Failure::Runtime(Error::Config(format!(
            "dataset has {n} rows; the 80/20 split needs at least 10 \
             to train on 2 and score 2 held-out rows"
        ))));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(a.seed));
    let (test_ix, train_ix) = order.split_at(n_test);

    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for row in &dataset.rows {
        let features = features_from_curve(
            &row.config,
            &row.values,
            feature_epoch,
            &dataset.meta.space,
            target,
        )?;
        xs.push(features.0);
        ys.push(*row.values.last().expect("dataset rows are validated non-empty"));
    }
    let xs_train: Vec<Vec<f64>> = train_ix.iter().map(|&i| xs[i].clone()).collect();
    let ys_train: Vec<f64> = train_ix.iter().map(|&i| ys[i]).collect();
    let truths: Vec<f64> = test_ix.iter().map(|&i| ys[i]).collect();

    let predictions: Vec<f64> = match a.kind {
        EvalKind::Oracle => truths.clone(),
        EvalKind::Svr => {
            let model = train_svr(&xs_train, &ys_train, &SvrParams::default())?;
            test_ix.iter().map(|&i| model.predict(&xs[i])).collect()
        }
        EvalKind::Qsvr => {
            let model = train_qsvr(
                &xs_train,
                &ys_train,
                &SvrParams::default(),
                &QsvrParams::default(),
                a.seed,
            )?;
            test_ix.iter().map(|&i| model.predict(&xs[i])).collect()
        }
    };
    let r2 = r_squared(&truths, &predictions)?;

    println!("predictor: {}", a.kind.name());
    println!(
        "features at epoch {feature_epoch} of {target}; {} training rows, {} held-out rows",
        train_ix.len(),
        test_ix.len()
    );
    println!("held-out R^2: {r2}");
    Ok(())
}

// ---------------------------------------------------------------------------
// coordinator

#[derive(Args)]
struct CoordinatorArgs {
    /// Listen address (use port 0 for an ephemeral port).
    #[arg(long, default_value = "127.0.0.1:7070")]
    bind: String,
    /// Number of workers to wait for before the run starts.
    #[arg(long)]
    workers: usize,
    /// Algorithm to run.
    #[arg(long, default_value = "swift_svr")]
    algorithm: String,
    /// Replay dataset path; its workers must hold the same files.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Meta file (`<name>.meta.json`) defining the search space for
    /// command-backed workers; without --dataset or --meta the run uses
    /// the default synthetic family.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Seed for drawing trials and scheduler decisions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum per-trial budget (defaults to the data's epoch count).
    #[arg(long)]
    r_max: Option<u32>,
    /// Elimination factor between rounds.
    #[arg(long)]
    eta: Option<u32>,
    /// Seconds to wait for worker registration.
    #[arg(long, default_value_t = 30)]
    register_timeout: u64,
    /// Seconds of silence before a worker counts as lost.
    #[arg(long, default_value_t = 10)]
    loss_timeout: u64,
    /// Directory for report.json, report.csv and plotdata.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_coordinator(a: CoordinatorArgs) -> CmdResult {
    if a.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    if a.dataset.is_some() && a.meta.is_some() {
        return Err(usage("--dataset and --meta are mutually exclusive"));
    }
    let algorithm: Algorithm = a.algorithm.parse().map_err(Failure::Usage)?;
    let mut scheduler = SchedulerConfig {
        seed: a.seed,
        ..SchedulerConfig::default()
    };
    if let Some(r) = a.r_max {
        scheduler.r_max = Some(r);
    }
    if let Some(eta) = a.eta {
        scheduler.eta = eta;
    }
    scheduler.validate().map_err(Failure::Usage)?;

    let (source, metric_name, direction) = if let Some(path) = &a.dataset {
        let dataset = load_dataset(path)?;
        let metric = dataset.meta.metric_name.clone();
        let direction = dataset.meta.direction;
        (
            CoordinatorSource::Replay {
                dataset,
                mode: DrawMode::WithoutReplacement,
                draw_seed: a.seed,
            },
            metric,
            direction,
        )
    } else if let Some(meta_path) = &a.meta {
        let text = std::fs::read_to_string(meta_path).map_err(Error::from)?;
        let meta: DatasetMeta = serde_json::from_str(&text).map_err(Error::from)?;
        let metric = meta.metric_name.clone();
        let direction = meta.direction;
        (
            CoordinatorSource::Command {
                space: meta.space,
                metric_name: meta.metric_name,
                direction: meta.direction,
                target_epoch: meta.target_epoch as u32,
                draw_seed: a.seed,
            },
            metric,
            direction,
        )
    } else {
        (
            CoordinatorSource::Synthetic {
                spec: SyntheticSpec::default(),
                draw_seed: a.seed,
            },
            "synthetic_loss".to_string(),
            Direction::Minimize,
        )
    };

    let coordinator = Coordinator::bind(&a.bind)?;
    let addr = coordinator.local_addr()?;
    println!("listening on {addr}; waiting for {} workers", a.workers);
    let timeouts = CoordinatorTimeouts {
        register: Duration::from_secs(a.register_timeout),
        loss: Duration::from_secs(a.loss_timeout),
    };
    let outcome = coordinator.serve(algorithm, &scheduler, source, a.workers, &timeouts)?;

    let record = RunRecord {
        algorithm,
        run: 0,
        seed: a.seed,
        winner: outcome.run.winner.0,
        best_metric: outcome.run.best_metric,
        epochs: outcome.run.ledger.total(),
        wall_time_ms: outcome.wall_time_ms,
    };
    let report = ExperimentReport::new(metric_name, direction, vec![record]);
    print_summary(&report);
    println!("workers: {}", outcome.workers.join(", "));
    println!(
        "tasks: {} created, {} results accepted, {} reassigned, {} duplicates discarded, {} task errors, {} workers lost",
        outcome.stats.tasks_created,
        outcome.stats.results_accepted,
        outcome.stats.reassignments,
        outcome.stats.results_discarded,
        outcome.stats.task_errors,
        outcome.stats.workers_lost,
    );
    if let Some(out) = &a.out {
        let files = write_report_files(&report, out)?;
        println!("report files:");
        for file in &files {
            println!("  {}", file.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// worker

#[derive(Args)]
struct WorkerArgs {
    /// Coordinator address to connect to.
    #[arg(long)]
    coordinator: String,
    /// Name announced at registration (defaults to worker-<pid>).
    #[arg(long)]
    name: Option<String>,
    /// Replay dataset path backing this worker.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Shell command template run once per task; hyperparameters arrive
    /// as HP_* environment variables (see PROTOCOL.md).
    #[arg(long)]
    command: Option<String>,
    /// Meta file (`<name>.meta.json`) naming the search space the
    /// --command template expects.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Heartbeat interval in milliseconds.
    #[arg(long, default_value_t = 2000)]
    heartbeat_ms: u64,
    /// Connection attempts before giving up.
    #[arg(long, default_value_t = 5)]
    max_reconnects: u32,
    /// Pause between connection attempts in milliseconds.
    #[arg(long, default_value_t = 500)]
    reconnect_delay_ms: u64,
    /// Exit after completing this many tasks (failure-injection hook).
    #[arg(long)]
    max_tasks: Option<usize>,
}

fn cmd_worker(a: WorkerArgs) -> CmdResult {
    if a.dataset.is_some() && a.command.is_some() {
        return Err(usage("--dataset and --command are mutually exclusive"));
    }
    let backing = if let Some(path) = &a.dataset {
        WorkerBacking::Replay(load_dataset(path)?)
    } else if let Some(template) = &a.command {
        let meta_path = a
            .meta
            .as_ref()
            .ok_or_else(|| usage("--command needs --meta to define the search space"))?;
        let text = std::fs::read_to_string(meta_path).map_err(Error::from)?;
        let meta: DatasetMeta = serde_json::from_str(&text).map_err(Error::from)?;
        WorkerBacking::Command {
            template: template.clone(),
            space: meta.space,
        }
    } else {
        WorkerBacking::Synthetic(SyntheticSpec::default())
    };
    let name = a
        .name
        .clone()
        .unwrap_or_else(|| format!("worker-{}", std::process::id()));
    let mut cfg = WorkerConfig::new(a.coordinator.clone(), name, backing);
    cfg.heartbeat_interval = Duration::from_millis(a.heartbeat_ms);
    cfg.max_reconnects = a.max_reconnects;
    cfg.reconnect_delay = Duration::from_millis(a.reconnect_delay_ms);
    cfg.max_tasks = a.max_tasks;

    let report = run_worker(&cfg)?;
    println!(
        "served {} tasks ({})",
        report.tasks_answered,
        if report.shutdown_received {
            "shutdown received"
        } else {
            "task limit reached"
        }
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report

#[derive(Args)]
struct ReportArgs {
    /// A report.json or report.csv written by simulate or coordinator.
    path: PathBuf,
}

fn cmd_report(a: ReportArgs) -> CmdResult {
    let format = match a.path.extension().and_then(|e| e.to_str()) {
        Some("json") => ReportFormat::Json,
        Some("csv") => ReportFormat::Csv,
        _ => {
            return Err(usage(format!(
                "cannot tell the report format of {}: expected a .json or .csv file",
                a.path.display()
            )))
        }
    };
    let report = parse_report(format, &a.path)?;
    print_summary(&report);
    println!(
        "{} run records across {} algorithms",
        report.records.len(),
        report.summaries.len()
    );
    Ok(())
}
