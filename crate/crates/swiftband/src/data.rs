//! Learning-curve datasets: file formats, synthetic generation and seeded
//! trial drawing.
//!
//! A dataset is a table of fully trained trials — one hyperparameter
//! configuration plus its complete learning curve per row — stored as a pair
//! of files sharing a base path:
//!
//! * `<base>.curves.csv` with header `h_1,..,h_d,e_1,..,e_T`, one row per
//!   trial, every cell decimal floating-point text;
//! * `<base>.meta.json` describing the metric, its direction, the dimension
//!   count, the target epoch `T` and the search space.
//!
//! Schedulers replay these curves instead of training real models, which
//! makes every experiment in this crate deterministic and cheap.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    sample_config, Direction, HpDim, HpDomain, HyperparameterConfig, LearningCurve, SearchSpace,
    Trial, TrialId,
};
use crate::error::{Error, Result};

/// Descriptive header of a dataset, stored as `<base>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Name of the recorded metric, e.g. `synthetic_loss`.
    pub metric_name: String,
    /// Whether smaller or larger metric values are better.
    pub direction: Direction,
    /// Number of hyperparameter dimensions (must equal `space.len()`).
    pub hp_dim: usize,
    /// Number of epochs per curve.
    pub target_epoch: usize,
    /// The search space the configurations were drawn from.
    pub space: SearchSpace,
}

/// One dataset row: a configuration and its full curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    /// The trained configuration.
    pub config: HyperparameterConfig,
    /// Metric values for epochs `1..=target_epoch`.
    pub values: Vec<f64>,
}

/// A replayable table of fully trained trials.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurveDataset {
    /// Metric, direction, space and epoch count.
    pub meta: DatasetMeta,
    /// The trials.
    pub rows: Vec<DatasetRow>,
}

impl LearningCurveDataset {
    /// Number of rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// True when the dataset has no rows.
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Validates internal consistency: dimension count, curve lengths,
    /// finite cells, configurations inside the space.
    pub fn validate(&self) -> Result<()> {
        self.meta.space.validate()?;
        if self.meta.hp_dim != self.meta.space.len() {
            return Err(Error::Config(format!(
                "meta says hp_dim = {}, space has {} dimensions",
                self.meta.hp_dim,
                self.meta.space.len()
            )));
        }
        if self.meta.target_epoch == 0 {
            return Err(Error::Config("target_epoch must be at least 1".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !self.meta.space.contains(&row.config) {
                return Err(Error::Config(format!(
                    "row {i}: configuration is outside the search space"
                )));
            }
            if row.values.len() != self.meta.target_epoch {
                return Err(Error::Config(format!(
                    "row {i}: curve has {} epochs, expected {}",
                    row.values.len(),
                    self.meta.target_epoch
                )));
            }
            if let Some(bad) = row.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("row {i}: non-finite value {bad}")));
            }
        }
        Ok(())
    }

    /// Creates an untrained [`Trial`] replaying row `row`.
    pub fn make_trial(&self, id: TrialId, row: usize) -> Trial {
        Trial::new(
            id,
            self.rows[row].config.clone(),
            LearningCurve::empty(self.meta.metric_name.clone(), self.meta.direction),
        )
    }

    /// The stored metric value of `row` after `epoch` (1-based).
    pub fn value_at(&self, row: usize, epoch: usize) -> Option<f64> {
        if epoch == 0 {
            return None;
        }
        self.rows.get(row)?.values.get(epoch - 1).copied()
    }
}

fn base_path(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    for suffix in [".curves.csv", ".meta.json"] {
        if let Some(stripped) = s.strip_suffix(suffix) {
            return PathBuf::from(stripped);
        }
    }
    path.to_path_buf()
}

/// Loads a dataset from its base path (or from either of its two file
/// names). Errors name the offending file and 1-based row, counting the
/// header as row 1.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LearningCurveDataset> {
    let base = base_path(path.as_ref());
    let meta_path = base.with_extension("meta.json");
    let curves_path = base.with_extension("curves.csv");

    let meta_text = std::fs::read_to_string(&meta_path)?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;
    meta.space.validate()?;

    let d = meta.hp_dim;
    let t = meta.target_epoch;
    let expected_cols = d + t;
    let curves_name = curves_path.display().to_string();
    let row_err = |row: usize, msg: String| Error::Dataset {
        path: curves_name.clone(),
        row,
        msg,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&curves_path)?;

    let headers = reader
        .headers()
        .map_err(|e| row_err(1, e.to_string()))?
        .clone();
    let expected_headers: Vec<String> = (1..=d)
        .map(|i| format!("h_{i}"))
        .chain((1..=t).map(|i| format!("e_{i}")))
        .collect();
    if headers.len() != expected_cols || headers.iter().ne(expected_headers.iter().map(|s| s.as_str()))
    {
        return Err(row_err(
            1,
            format!(
                "header must be h_1..h_{d},e_1..e_{t} ({} columns), found {} columns",
                expected_cols,
                headers.len()
            ),
        ));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2; // header is row 1
        let record = record.map_err(|e| row_err(row_no, e.to_string()))?;
        if record.len() != expected_cols {
            return Err(row_err(
                row_no,
                format!("expected {expected_cols} columns, found {}", record.len()),
            ));
        }
        let mut cells = Vec::with_capacity(expected_cols);
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                row_err(row_no, format!("column {}: unparsable cell `{cell}`", col + 1))
            })?;
            cells.push(value);
        }
        let mut values = Vec::with_capacity(d);
        for (dim, &raw) in cells[..d].iter().enumerate() {
            values.push(
                meta.space
                    .value_from_f64(dim, raw)
                    .map_err(|e| row_err(row_no, e.to_string()))?,
            );
        }
        let config = HyperparameterConfig { values };
        if !meta.space.contains(&config) {
            return Err(row_err(row_no, "configuration outside the search space".into()));
        }
        let curve = cells[d..].to_vec();
        if let Some(bad) = curve.iter().find(|v| !v.is_finite()) {
            return Err(row_err(row_no, format!("non-finite curve value {bad}")));
        }
        rows.push(DatasetRow { config, values: curve });
    }

    let dataset = LearningCurveDataset { meta, rows };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes `<base>.curves.csv` and `<base>.meta.json`, creating parent
/// directories as needed. Cells are shortest round-trip float text, so a
/// save → load cycle reproduces the dataset exactly.
pub fn save_dataset(dataset: &LearningCurveDataset, path: impl AsRef<Path>) -> Result<()> {
    dataset.validate()?;
    let base = base_path(path.as_ref());
    if let Some(parent) = base.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    let meta_json = serde_json::to_string_pretty(&dataset.meta)?;
    std::fs::write(base.with_extension("meta.json"), meta_json + "\n")?;

    let mut writer = csv::Writer::from_path(base.with_extension("curves.csv"))?;
    let d = dataset.meta.hp_dim;
    let t = dataset.meta.target_epoch;
    let header: Vec<String> = (1..=d)
        .map(|i| format!("h_{i}"))
        .chain((1..=t).map(|i| format!("e_{i}")))
        .collect();
    writer.write_record(&header)?;
    for row in &dataset.rows {
        let mut record = Vec::with_capacity(d + t);
        for value in &row.config.values {
            record.push(value.as_f64().to_string());
        }
        for value in &row.values {
            record.push(value.to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shape parameters of the synthetic power-law curve family
/// `y(t) = y_inf + (y_0 - y_inf) * t^(-c)`.
///
/// The exponent and floor are affine in the first two normalized
/// hyperparameters, with small fixed weights on any remaining dimensions,
/// so configurations fully determine their noiseless curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveFamily {
    /// Metric value at epoch 1 before decay, `y_0`.
    pub start: f64,
    /// Base decay exponent.
    pub c_base: f64,
    /// Weight of the first normalized dimension on the exponent.
    pub c_slope: f64,
    /// Base asymptotic floor.
    pub floor_base: f64,
    /// Weight of the second normalized dimension on the floor.
    pub floor_slope: f64,
}

impl Default for CurveFamily {
    fn default() -> Self {
        CurveFamily {
            start: 1.0,
            c_base: 0.3,
            c_slope: 1.2,
            floor_base: 0.05,
            floor_slope: 0.4,
        }
    }
}

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Number of rows to generate.
    pub rows: usize,
    /// Hyperparameter dimensions (all continuous over `[0, 1]`).
    pub hp_dim: usize,
    /// Epochs per curve.
    pub target_epoch: usize,
    /// Standard deviation of the Gaussian noise added per epoch.
    pub noise_sigma: f64,
    /// Curve shape parameters.
    pub family: CurveFamily,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 200,
            hp_dim: 3,
            target_epoch: 81,
            noise_sigma: 0.01,
            family: CurveFamily::default(),
        }
    }
}

impl SyntheticSpec {
    /// The search space of a synthetic dataset: `h_1..h_d`, each continuous
    /// over `[0, 1]`.
    pub fn space(&self) -> SearchSpace {
        SearchSpace {
            dims: (1..=self.hp_dim)
                .map(|i| HpDim {
                    name: format!("h_{i}"),
                    domain: HpDomain::Continuous { low: 0.0, high: 1.0 },
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hp_dim == 0 {
            return Err(Error::Config("synthetic hp_dim must be at least 1".into()));
        }
        if self.target_epoch == 0 {
            return Err(Error::Config("synthetic target_epoch must be at least 1".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Noiseless curve value `y_inf + (y_0 - y_inf) * t^(-c)` at epoch `t`.
pub fn power_law_value(start: f64, floor: f64, exponent: f64, epoch: usize) -> f64 {
    floor + (start - floor) * (epoch as f64).powf(-exponent)
}

/// Maps a configuration to its decay exponent and floor.
///
/// With normalized values `h_i`: the exponent is
/// `c_base + c_slope * h_1`, the floor `floor_base + floor_slope * h_2`
/// (midpoint when a one-dimensional space has no `h_2`), and dimensions
/// three onward shift both by a small fixed-weight average.
pub fn curve_params(
    family: &CurveFamily,
    space: &SearchSpace,
    config: &HyperparameterConfig,
) -> (f64, f64) {
    let h: Vec<f64> = config
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| space.normalize(i, v))
        .collect();
    let mut exponent = family.c_base + family.c_slope * h[0];
    let mut floor = match h.get(1) {
        Some(&h2) => family.floor_base + family.floor_slope * h2,
        None => family.floor_base + 0.5 * family.floor_slope,
    };
    if h.len() > 2 {
        let rest = h[2..].iter().sum::<f64>() / (h.len() - 2) as f64;
        exponent += 0.1 * rest;
        floor += 0.05 * rest;
    }
    (exponent, floor)
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn config_salt(config: &HyperparameterConfig) -> u64 {
    fnv1a(
        config
            .values
            .iter()
            .flat_map(|v| v.as_f64().to_bits().to_le_bytes()),
    )
}

/// The full synthetic curve of one configuration.
///
/// Noise is drawn from a generator seeded by `(salt, config)`, so any party
/// holding the spec reproduces the identical curve for the same
/// configuration — which is what makes retrying a training task elsewhere
/// safe.
pub fn curve_for_config(
    spec: &SyntheticSpec,
    space: &SearchSpace,
    config: &HyperparameterConfig,
    salt: u64,
) -> Vec<f64> {
    let (exponent, floor) = curve_params(&spec.family, space, config);
    let mut values: Vec<f64> = (1..=spec.target_epoch)
        .map(|t| power_law_value(spec.family.start, floor, exponent, t))
        .collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(salt ^ config_salt(config));
        let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        for v in &mut values {
            *v += noise.sample(&mut rng);
        }
    }
    values
}

/// Generates a synthetic dataset: `spec.rows` uniform configurations with
/// power-law curves plus per-epoch Gaussian noise. Deterministic per seed.
///
/// Curves are built with a zero salt, so each row is a pure function of its
/// configuration: a worker holding only the spec and a config reproduces the
/// stored curve exactly.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<LearningCurveDataset> {
    spec.validate()?;
    let space = spec.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..spec.rows)
        .map(|_| {
            let config = sample_config(&space, &mut rng);
            let values = curve_for_config(spec, &space, &config, 0);
            DatasetRow { config, values }
        })
        .collect();
    let dataset = LearningCurveDataset {
        meta: DatasetMeta {
            metric_name: "synthetic_loss".into(),
            direction: Direction::Minimize,
            hp_dim: spec.hp_dim,
            target_epoch: spec.target_epoch,
            space,
        },
        rows,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Replacement mode of a [`TrialDrawer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// Every draw picks uniformly among all rows.
    WithReplacement,
    /// Draws walk a seeded permutation; the source is exhausted after one
    /// pass.
    WithoutReplacement,
}

/// Seeded row sampler for replay experiments.
///
/// Identically seeded drawers yield identical row sequences regardless of
/// which scheduler consumes them, which is what makes paired algorithm
/// comparisons on shared seeds meaningful.
#[derive(Debug, Clone)]
pub struct TrialDrawer {
    mode: DrawMode,
    n_rows: usize,
    order: Vec<usize>,
    next: usize,
    rng: ChaCha8Rng,
}

impl TrialDrawer {
    /// A drawer over `n_rows` rows. In
    /// [`DrawMode::WithoutReplacement`] the seed fixes a permutation of all
    /// rows; in [`DrawMode::WithReplacement`] it seeds the per-draw RNG.
    pub fn new(n_rows: usize, seed: u64, mode: DrawMode) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = match mode {
            DrawMode::WithoutReplacement => {
                let mut order: Vec<usize> = (0..n_rows).collect();
                // Fisher-Yates, driven by the seeded generator.
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
                order
            }
            DrawMode::WithReplacement => Vec::new(),
        };
        TrialDrawer {
            mode,
            n_rows,
            order,
            next: 0,
            rng,
        }
    }

    /// Number of draws performed so far.
    pub fn drawn(&self) -> usize {
        self.next
    }

    /// Draws the next row index.
    pub fn draw(&mut self) -> Result<usize> {
        if self.n_rows == 0 {
            return Err(Error::SourceExhausted {
                needed: 1,
                available: 0,
            });
        }
        match self.mode {
            DrawMode::WithReplacement => {
                self.next += 1;
                Ok(self.rng.random_range(0..self.n_rows))
            }
            DrawMode::WithoutReplacement => {
                if self.next >= self.order.len() {
                    return Err(Error::SourceExhausted {
                        needed: self.next + 1,
                        available: self.n_rows,
                    });
                }
                let row = self.order[self.next];
                self.next += 1;
                Ok(row)
            }
        }
    }
}
