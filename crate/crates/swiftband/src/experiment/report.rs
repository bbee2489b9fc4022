//! Experiment reports: per-run rows, per-algorithm aggregates, and the
//! three output files.
//!
//! * `report.json` — the whole [`ExperimentReport`] as pretty JSON;
//! * `report.csv` — one table with a `section` column: a `meta` row
//!   (metric name and direction), one `run` row per (algorithm, seed) run,
//!   one `aggregate` row per algorithm (columns in [`REPORT_COLUMNS`]);
//! * `plotdata.csv` — per-run points `algorithm,run,epochs,best_metric`
//!   followed by a blank line and an aggregate band section, ready for any
//!   plotting tool.
//!
//! Both report formats parse back into an equal in-memory report; numbers
//! are written as shortest round-trip decimal text, so emit → parse is
//! lossless bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Direction;
use crate::error::{Error, Result};
use crate::scheduler::Algorithm;

/// One (algorithm, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    /// Run index within the algorithm, `0 .. runs_per_algorithm`.
    pub run: usize,
    /// The run's seed: experiment base seed plus run index, shared across
    /// algorithms so comparisons are paired.
    pub seed: u64,
    /// Trial id of the winning configuration in that run, kept so
    /// per-seed winners can be inspected across algorithms.
    pub winner: u64,
    /// Final metric of the winning trial.
    pub best_metric: f64,
    /// Training epochs the run consumed, from its epoch ledger.
    pub epochs: u64,
    /// Wall-clock duration; reported but never part of determinism checks.
    pub wall_time_ms: u64,
}

/// Aggregates over one algorithm's runs, all recomputable from the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub metric_mean: f64,
    /// Best of the per-run winning metrics (direction-aware).
    pub metric_best: f64,
    /// Worst of the per-run winning metrics (direction-aware).
    pub metric_worst: f64,
    pub epochs_mean: f64,
    pub epochs_min: u64,
    pub epochs_max: u64,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metric_name: String,
    pub direction: Direction,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<AlgorithmSummary>,
}

impl ExperimentReport {
    /// Builds a report, deriving the summaries from the records.
    pub fn new(
        metric_name: impl Into<String>,
        direction: Direction,
        records: Vec<RunRecord>,
    ) -> Self {
        let summaries = summarize(direction, &records);
        ExperimentReport {
            metric_name: metric_name.into(),
            direction,
            records,
            summaries,
        }
    }

    /// Checks the aggregate-consistency invariant: recomputing the
    /// summaries from the rows reproduces the stored summaries exactly.
    pub fn verify(&self) -> Result<()> {
        let expected = summarize(self.direction, &self.records);
        if self.summaries != expected {
            return Err(Error::Config(
                "report summaries do not match their per-run rows".into(),
            ));
        }
        Ok(())
    }

    /// The summary for one algorithm, if it ran.
    pub fn summary_for(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }

    /// A copy with every wall-time field zeroed — byte comparisons between
    /// reports use this, since wall time is the one nondeterministic field.
    pub fn with_zeroed_wall_times(&self) -> ExperimentReport {
        let mut copy = self.clone();
        for record in &mut copy.records {
            record.wall_time_ms = 0;
        }
        copy
    }
}

/// Groups records by algorithm (in first-appearance order) and computes
/// each group's aggregates. Reapplying this to the same rows reproduces
/// the same summaries bit for bit.
pub fn summarize(direction: Direction, records: &[RunRecord]) -> Vec<AlgorithmSummary> {
    let mut order: Vec<Algorithm> = Vec::new();
    for record in records {
        if !order.contains(&record.algorithm) {
            order.push(record.algorithm);
        }
    }
    order
        .into_iter()
        .map(|algorithm| {
            let group: Vec<&RunRecord> =
                records.iter().filter(|r| r.algorithm == algorithm).collect();
            let n = group.len();
            let metric_mean =
                group.iter().map(|r| r.best_metric).sum::<f64>() / n as f64;
            let mut metrics: Vec<f64> = group.iter().map(|r| r.best_metric).collect();
            metrics.sort_by(f64::total_cmp);
            let (metric_best, metric_worst) = match direction {
                Direction::Minimize => (metrics[0], metrics[n - 1]),
                Direction::Maximize => (metrics[n - 1], metrics[0]),
            };
            let epochs_mean = group.iter().map(|r| r.epochs as f64).sum::<f64>() / n as f64;
            let epochs_min = group.iter().map(|r| r.epochs).min().expect("non-empty group");
            let epochs_max = group.iter().map(|r| r.epochs).max().expect("non-empty group");
            AlgorithmSummary {
                algorithm,
                runs: n,
                metric_mean,
                metric_best,
                metric_worst,
                epochs_mean,
                epochs_min,
                epochs_max,
            }
        })
        .collect()
}

/// Output format of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Fixed column order of `report.csv`.
pub const REPORT_COLUMNS: [&str; 17] = [
    "section",
    "algorithm",
    "run",
    "seed",
    "winner",
    "best_metric",
    "epochs",
    "wall_time_ms",
    "runs",
    "metric_mean",
    "metric_best",
    "metric_worst",
    "epochs_mean",
    "epochs_min",
    "epochs_max",
    "metric_name",
    "direction",
];

fn direction_str(direction: Direction) -> &'static str {
    match direction {
        Direction::Minimize => "minimize",
        Direction::Maximize => "maximize",
    }
}

fn parse_direction(text: &str) -> Result<Direction> {
    match text {
        "minimize" => Ok(Direction::Minimize),
        "maximize" => Ok(Direction::Maximize),
        other => Err(Error::Config(format!("unknown direction `{other}`"))),
    }
}

/// Writes `report` to `path` in the chosen format. A report must contain at
/// least one run; emitting an empty one is refused upstream of any file I/O.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::Config("refusing to emit an empty report".into()));
    }
    report.verify()?;
    match format {
        ReportFormat::Json => {
            let json = serde_json::to_string_pretty(report)?;
            std::fs::write(path, json + "\n")?;
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_path(path.as_ref())?;
            writer.write_record(REPORT_COLUMNS)?;
            let blank = || String::new();
            writer.write_record([
                "meta".to_string(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                report.metric_name.clone(),
                direction_str(report.direction).to_string(),
            ])?;
            for r in &report.records {
                writer.write_record([
                    "run".to_string(),
                    r.algorithm.name().to_string(),
                    r.run.to_string(),
                    r.seed.to_string(),
                    r.winner.to_string(),
                    r.best_metric.to_string(),
                    r.epochs.to_string(),
                    r.wall_time_ms.to_string(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                ])?;
            }
            for s in &report.summaries {
                writer.write_record([
                    "aggregate".to_string(),
                    s.algorithm.name().to_string(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    blank(),
                    s.runs.to_string(),
                    s.metric_mean.to_string(),
                    s.metric_best.to_string(),
                    s.metric_worst.to_string(),
                    s.epochs_mean.to_string(),
                    s.epochs_min.to_string(),
                    s.epochs_max.to_string(),
                    blank(),
                    blank(),
                ])?;
            }
            writer.flush()?;
        }
    }
    Ok(())
}

/// Reads a report back from either format, verifying its aggregates.
pub fn parse_report(format: ReportFormat, path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let report = match format {
        ReportFormat::Json => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)?
        }
        ReportFormat::Csv => parse_report_csv(path)?,
    };
    report.verify()?;
    Ok(report)
}

fn parse_report_csv(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(REPORT_COLUMNS) {
        return Err(Error::Config(format!(
            "report header must be {}",
            REPORT_COLUMNS.join(",")
        )));
    }
    let field = |record: &csv::StringRecord, col: usize| -> String {
        record.get(col).unwrap_or("").to_string()
    };
    let parse_num = |text: &str, what: &str| -> Result<f64> {
        text.parse::<f64>()
            .map_err(|_| Error::Config(format!("unparsable {what}: `{text}`")))
    };

    let mut meta: Option<(String, Direction)> = None;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for row in reader.records() {
        let row = row?;
        match field(&row, 0).as_str() {
            "meta" => {
                meta = Some((field(&row, 15), parse_direction(&field(&row, 16))?));
            }
            "run" => records.push(RunRecord {
                algorithm: field(&row, 1).parse()?,
                run: parse_num(&field(&row, 2), "run")? as usize,
                seed: field(&row, 3)
                    .parse()
                    .map_err(|_| Error::Config("unparsable seed".into()))?,
                winner: field(&row, 4)
                    .parse()
                    .map_err(|_| Error::Config("unparsable winner".into()))?,
                best_metric: parse_num(&field(&row, 5), "best_metric")?,
                epochs: field(&row, 6)
                    .parse()
                    .map_err(|_| Error::Config("unparsable epochs".into()))?,
                wall_time_ms: field(&row, 7)
                    .parse()
                    .map_err(|_| Error::Config("unparsable wall_time_ms".into()))?,
            }),
            "aggregate" => summaries.push(AlgorithmSummary {
                algorithm: field(&row, 1).parse()?,
                runs: parse_num(&field(&row, 8), "runs")? as usize,
                metric_mean: parse_num(&field(&row, 9), "metric_mean")?,
                metric_best: parse_num(&field(&row, 10), "metric_best")?,
                metric_worst: parse_num(&field(&row, 11), "metric_worst")?,
                epochs_mean: parse_num(&field(&row, 12), "epochs_mean")?,
                epochs_min: field(&row, 13)
                    .parse()
                    .map_err(|_| Error::Config("unparsable epochs_min".into()))?,
                epochs_max: field(&row, 14)
                    .parse()
                    .map_err(|_| Error::Config("unparsable epochs_max".into()))?,
            }),
            other => {
                return Err(Error::Config(format!("unknown report section `{other}`")))
            }
        }
    }
    let (metric_name, direction) =
        meta.ok_or_else(|| Error::Config("report has no meta row".into()))?;
    Ok(ExperimentReport {
        metric_name,
        direction,
        records,
        summaries,
    })
}

/// Writes `plotdata.csv`: per-run points, a blank line, then one aggregate
/// band row per algorithm (`metric_avg` / `metric_best` / `metric_worst`
/// over x = mean epochs).
pub fn emit_plot_data(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::Config("refusing to plot an empty report".into()));
    }
    report.verify()?;
    let mut out = String::new();
    out.push_str("algorithm,run,epochs,best_metric\n");
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.algorithm.name(),
            r.run,
            r.epochs,
            r.best_metric
        ));
    }
    out.push('\n');
    out.push_str("algorithm,epochs_mean,metric_avg,metric_best,metric_worst\n");
    for s in &report.summaries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.algorithm.name(),
            s.epochs_mean,
            s.metric_mean,
            s.metric_best,
            s.metric_worst
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes `report.json`, `report.csv` and `plotdata.csv` into `dir`,
/// creating it if needed. Returns the three paths in that order.
pub fn write_report_files(
    report: &ExperimentReport,
    dir: impl AsRef<Path>,
) -> Result<[std::path::PathBuf; 3]> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let json = dir.join("report.json");
    let csv = dir.join("report.csv");
    let plot = dir.join("plotdata.csv");
    emit_report(report, ReportFormat::Json, &json)?;
    emit_report(report, ReportFormat::Csv, &csv)?;
    emit_plot_data(report, &plot)?;
    Ok([json, csv, plot])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(
        algorithm: Algorithm,
        run: usize,
        best_metric: f64,
        epochs: u64,
    ) -> RunRecord {
        RunRecord {
            algorithm,
            run,
            seed: 100 + run as u64,
            winner: run as u64 * 3,
            best_metric,
            epochs,
            wall_time_ms: 7,
        }
    }

    fn sample_report() -> ExperimentReport {
        ExperimentReport::new(
            "synthetic_loss",
            Direction::Minimize,
            vec![
                record(Algorithm::Hyperband, 0, 0.25, 20),
                record(Algorithm::Hyperband, 1, 0.75, 10),
                record(Algorithm::SwiftSvr, 0, 1.0 / 3.0, 18),
                record(Algorithm::SwiftSvr, 1, 0.5, 8),
            ],
        )
    }

    #[test]
    fn summaries_match_hand_computation() {
        let report = sample_report();
        let hb = report.summary_for(Algorithm::Hyperband).unwrap();
        assert_eq!(hb.runs, 2);
        assert_eq!(hb.metric_mean, 0.5); // (0.25 + 0.75) / 2
        assert_eq!(hb.metric_best, 0.25); // minimizing: smaller is better
        assert_eq!(hb.metric_worst, 0.75);
        assert_eq!(hb.epochs_mean, 15.0);
        assert_eq!(hb.epochs_min, 10);
        assert_eq!(hb.epochs_max, 20);
        report.verify().unwrap();
    }

    #[test]
    fn direction_flips_best_and_worst() {
        let records = vec![
            record(Algorithm::Fast, 0, 0.2, 5),
            record(Algorithm::Fast, 1, 0.9, 5),
        ];
        let max = summarize(Direction::Maximize, &records);
        assert_eq!(max[0].metric_best, 0.9);
        assert_eq!(max[0].metric_worst, 0.2);
    }

    #[test]
    fn tampered_summaries_fail_verification() {
        let mut report = sample_report();
        report.summaries[0].metric_mean += 0.001;
        assert!(report.verify().is_err());
    }

    #[test]
    fn json_round_trips_exactly() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        emit_report(&report, ReportFormat::Json, &path).unwrap();
        let back = parse_report(ReportFormat::Json, &path).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        emit_report(&report, ReportFormat::Csv, &path).unwrap();
        let back = parse_report(ReportFormat::Csv, &path).unwrap();
        assert_eq!(report, back, "1/3 and friends must survive the text trip");
    }

    #[test]
    fn empty_reports_are_refused() {
        let report = ExperimentReport::new("m", Direction::Minimize, vec![]);
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(&report, ReportFormat::Csv, dir.path().join("r.csv"));
        assert!(err.is_err());
        assert!(emit_plot_data(&report, dir.path().join("p.csv")).is_err());
    }

    #[test]
    fn wrong_csv_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        let err = parse_report(ReportFormat::Csv, &path).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
    }

    #[test]
    fn plot_data_has_points_then_bands() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plotdata.csv");
        emit_plot_data(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let sections: Vec<&str> = text.split("\n\n").collect();
        assert_eq!(sections.len(), 2, "points, then aggregates");

        let point_lines: Vec<&str> = sections[0].lines().collect();
        assert_eq!(point_lines[0], "algorithm,run,epochs,best_metric");
        assert_eq!(point_lines.len(), 1 + report.records.len());

        let band_lines: Vec<&str> = sections[1].lines().collect();
        assert_eq!(
            band_lines[0],
            "algorithm,epochs_mean,metric_avg,metric_best,metric_worst"
        );
        // One series per algorithm that ran.
        assert_eq!(band_lines.len(), 1 + report.summaries.len());
        // Bands are ordered: minimizing, so best <= avg <= worst.
        for line in &band_lines[1..] {
            let cells: Vec<f64> = line
                .split(',')
                .skip(2)
                .map(|c| c.parse().unwrap())
                .collect();
            let (avg, best, worst) = (cells[0], cells[1], cells[2]);
            assert!(best <= avg && avg <= worst, "bad bands in {line}");
        }
    }

    #[test]
    fn zeroed_wall_times_differ_only_in_wall_times() {
        let report = sample_report();
        let zeroed = report.with_zeroed_wall_times();
        assert!(zeroed.records.iter().all(|r| r.wall_time_ms == 0));
        assert_eq!(zeroed.summaries, report.summaries);
    }

    proptest! {
        /// Aggregate consistency: whatever the rows, the stored summaries
        /// verify, group sizes add up, and means sit inside [min, max].
        #[test]
        fn summaries_verify_for_arbitrary_rows(
            rows in proptest::collection::vec(
                (0usize..5, -1e9f64..1e9, 0u64..1_000_000, 0u64..10_000),
                1..60,
            ),
            maximize in proptest::bool::ANY,
        ) {
            let direction = if maximize { Direction::Maximize } else { Direction::Minimize };
            let records: Vec<RunRecord> = rows
                .iter()
                .enumerate()
                .map(|(i, &(algo, metric, epochs, wall))| RunRecord {
                    algorithm: Algorithm::ALL[algo],
                    run: i,
                    seed: i as u64,
                    winner: i as u64,
                    best_metric: metric,
                    epochs,
                    wall_time_ms: wall,
                })
                .collect();
            let report = ExperimentReport::new("m", direction, records.clone());
            report.verify().unwrap();
            let total: usize = report.summaries.iter().map(|s| s.runs).sum();
            prop_assert_eq!(total, records.len());
            for s in &report.summaries {
                let (lo, hi) = match direction {
                    Direction::Minimize => (s.metric_best, s.metric_worst),
                    Direction::Maximize => (s.metric_worst, s.metric_best),
                };
                prop_assert!(lo <= hi);
                prop_assert!(s.epochs_mean >= s.epochs_min as f64 - 1e-9);
                prop_assert!(s.epochs_mean <= s.epochs_max as f64 + 1e-9);
            }
        }
    }
}
