//! ε-insensitive support-vector regression with an RBF kernel, trained by
//! pairwise coordinate ascent on the dual problem.
//!
//! The trained model maximizes
//!
//! ```text
//! W(α, α*) = -1/2 ΣΣ (αᵢ-α*ᵢ)(αⱼ-α*ⱼ) K(xᵢ,xⱼ)
//!            - ε Σ (αᵢ+α*ᵢ) + Σ yᵢ (αᵢ-α*ᵢ)
//! ```
//!
//! subject to `0 ≤ αᵢ, α*ᵢ ≤ C` and `Σ (αᵢ-α*ᵢ) = 0`. The solver walks
//! maximal-violating pairs of dual variables and stops when the
//! Karush-Kuhn-Tucker violation falls below a tolerance, or after a fixed
//! number of pair updates — in which case the best feasible iterate is
//! returned and flagged, never an error.
//!
//! Features are standardized with training-set statistics; targets are
//! standardized before training and predictions mapped back, so `ε` and `C`
//! act on a scale-free problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the regressor itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    /// Box constraint on each dual coefficient.
    pub c: f64,
    /// Half-width of the no-penalty tube, on the standardized target scale.
    pub epsilon: f64,
    /// RBF width; `None` defaults to `1 / feature_count`.
    pub gamma: Option<f64>,
    /// KKT violation below which the solver stops.
    pub tolerance: f64,
    /// Hard cap on pair updates; hitting it degrades to the best feasible
    /// iterate with a warning flag.
    pub max_pair_updates: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            // Moderate regularization: on standardized data the fit is
            // nearly identical to larger boxes, and it keeps the dual
            // coefficients small enough that the bit-encoded variant
            // (which quantizes [0, C] into 2ᴷ levels) stays on a usable
            // lattice with an annealable penalty weight.
            c: 2.0,
            epsilon: 1e-3,
            gamma: None,
            tolerance: 1e-3,
            max_pair_updates: 100_000,
        }
    }
}

impl SvrParams {
    fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Config("svr: C must be finite and > 0".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config("svr: epsilon must be finite and >= 0".into()));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config("svr: gamma must be finite and > 0".into()));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config("svr: tolerance must be finite and > 0".into()));
        }
        if self.max_pair_updates == 0 {
            return Err(Error::Config("svr: max_pair_updates must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-feature standardization statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FeatureStats {
    mean: Vec<f64>,
    /// Standard deviation per feature; `0` flags a constant feature, whose
    /// standardized value is defined as `0`.
    std: Vec<f64>,
}

impl FeatureStats {
    pub(crate) fn fit(xs: &[Vec<f64>]) -> Self {
        let n = xs.len() as f64;
        let d = xs[0].len();
        let mut mean = vec![0.0; d];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    0.0
                }
            })
            .collect();
        FeatureStats { mean, std }
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn constant_flags(&self) -> Vec<bool> {
        self.std.iter().map(|s| *s == 0.0).collect()
    }
}

pub(crate) fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let dist2: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
    (-gamma * dist2).exp()
}

pub(crate) fn rbf_gram(xs: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        gram[i][i] = 1.0;
        for j in 0..i {
            let k = rbf(&xs[i], &xs[j], gamma);
            gram[i][j] = k;
            gram[j][i] = k;
        }
    }
    gram
}

fn validate_training_set(xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Numeric(format!(
            "svr: {} inputs vs {} targets",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Numeric("svr: need at least 2 training points".into()));
    }
    let d = xs[0].len();
    if d == 0 {
        return Err(Error::Numeric("svr: empty feature vectors".into()));
    }
    for (i, x) in xs.iter().enumerate() {
        if x.len() != d {
            return Err(Error::Numeric(format!(
                "svr: point {i} has {} features, expected {d}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("svr: non-finite feature in point {i}")));
        }
    }
    if let Some(bad) = ys.iter().find(|y| !y.is_finite()) {
        return Err(Error::NonFinite(*bad));
    }
    Ok(())
}

/// Standardized training data with the statistics needed to undo it.
pub(crate) struct Prepared {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub x_stats: FeatureStats,
    pub y_mean: f64,
    pub y_std: f64,
    pub gamma: f64,
}

pub(crate) fn prepare(xs: &[Vec<f64>], ys: &[f64], params: &SvrParams) -> Result<Prepared> {
    params.validate()?;
    validate_training_set(xs, ys)?;
    let x_stats = FeatureStats::fit(xs);
    let xs_std: Vec<Vec<f64>> = xs.iter().map(|x| x_stats.apply(x)).collect();
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let y_var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n;
    let y_std = if y_var.sqrt() > 1e-12 { y_var.sqrt() } else { 1.0 };
    let ys_std = ys.iter().map(|y| (y - y_mean) / y_std).collect();
    let gamma = params.gamma.unwrap_or(1.0 / xs[0].len() as f64);
    Ok(Prepared {
        xs: xs_std,
        ys: ys_std,
        x_stats,
        y_mean,
        y_std,
        gamma,
    })
}

/// Output of the dual solver, all on the standardized target scale.
pub(crate) struct DualSolution {
    /// `βᵢ = αᵢ - α*ᵢ` per training point.
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Value of `W` at the returned iterate.
    pub objective: f64,
    pub hit_cap: bool,
}

/// Pairwise dual ascent over the `2n` variables `(α, α*)`.
///
/// Index `t < n` is `αᵢ` and `t >= n` is `α*ᵢ` with sign `s_t = ±1`; the
/// equality constraint `Σ s_t a_t = 0` is preserved exactly by every pair
/// update, so intermediate iterates are always feasible.
pub(crate) fn solve_dual(
    gram: &[Vec<f64>],
    ys: &[f64],
    c: f64,
    epsilon: f64,
    tolerance: f64,
    max_pair_updates: usize,
) -> DualSolution {
    const TAU: f64 = 1e-12;
    let n = ys.len();
    let two_n = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let base = |t: usize| if t < n { t } else { t - n };

    let mut a = vec![0.0f64; two_n];
    // Gradient of the minimized form F(a) = 1/2 aᵀQa + pᵀa, starting at 0.
    let mut grad: Vec<f64> = (0..two_n)
        .map(|t| epsilon - sign(t) * ys[base(t)])
        .collect();

    let mut pair_updates = 0usize;
    let mut hit_cap = false;

    loop {
        // Maximal-violation working pair (second-order choice for j).
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..two_n {
            let in_up = if sign(t) > 0.0 { a[t] < c } else { a[t] > 0.0 };
            if in_up {
                let val = -sign(t) * grad[t];
                if val >= gmax {
                    gmax = val;
                    i = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i != usize::MAX {
            let bi = base(i);
            for t in 0..two_n {
                let in_low = if sign(t) > 0.0 { a[t] > 0.0 } else { a[t] < c };
                if !in_low {
                    continue;
                }
                let neg_sg = -sign(t) * grad[t];
                if neg_sg < gmin {
                    gmin = neg_sg;
                }
                let grad_diff = gmax - neg_sg;
                if grad_diff > 0.0 {
                    let bt = base(t);
                    let quad = (gram[bi][bi] + gram[bt][bt] - 2.0 * gram[bi][bt]).max(TAU);
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        j = t;
                    }
                }
            }
        }

        if i == usize::MAX || j == usize::MAX || gmax - gmin <= tolerance {
            break;
        }
        if pair_updates >= max_pair_updates {
            hit_cap = true;
            break;
        }
        pair_updates += 1;

        let (bi, bj) = (base(i), base(j));
        let quad = (gram[bi][bi] + gram[bj][bj] - 2.0 * gram[bi][bj]).max(TAU);
        let (old_i, old_j) = (a[i], a[j]);

        if sign(i) != sign(j) {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else {
                if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = -diff;
                }
                if a[j] > c {
                    a[j] = c;
                    a[i] = c + diff;
                }
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = sum;
                }
                if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = sum;
                }
            }
        }

        let (delta_i, delta_j) = (a[i] - old_i, a[j] - old_j);
        if delta_i == 0.0 && delta_j == 0.0 {
            // Numerically stuck pair; KKT gap is within rounding of tolerance.
            break;
        }
        for t in 0..two_n {
            let bt = base(t);
            grad[t] += sign(t)
                * (sign(i) * gram[bt][bi] * delta_i + sign(j) * gram[bt][bj] * delta_j);
        }
    }

    // Bias from the KKT conditions: average -s_t * grad_t over free
    // variables, else the midpoint of the feasible interval.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..two_n {
        if a[t] > 0.0 && a[t] < c {
            free_sum += -sign(t) * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for t in 0..two_n {
            let in_up = if sign(t) > 0.0 { a[t] < c } else { a[t] > 0.0 };
            let in_low = if sign(t) > 0.0 { a[t] > 0.0 } else { a[t] < c };
            let val = -sign(t) * grad[t];
            if in_up && val > up {
                up = val;
            }
            if in_low && val < low {
                low = val;
            }
        }
        if up.is_finite() && low.is_finite() {
            (up + low) / 2.0
        } else {
            0.0
        }
    };

    // W = -F(a); with grad = Qa + p this is -(aᵀ grad + aᵀ p) / 2.
    let mut objective = 0.0;
    for t in 0..two_n {
        let p = epsilon - sign(t) * ys[base(t)];
        objective -= 0.5 * a[t] * (grad[t] + p);
    }

    let beta = (0..n).map(|i| a[i] - a[i + n]).collect();
    DualSolution {
        beta,
        bias,
        objective,
        hit_cap,
    }
}

/// A trained regressor: standardized support inputs, dual coefficients and
/// the statistics to map new points in and predictions back out.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    inputs: Vec<Vec<f64>>,
    beta: Vec<f64>,
    bias: f64,
    gamma: f64,
    x_stats: FeatureStats,
    y_mean: f64,
    y_std: f64,
    /// True when training stopped at the pair-update cap instead of
    /// reaching the KKT tolerance.
    pub hit_iteration_cap: bool,
    /// Dual objective value reached during training (standardized scale).
    pub dual_objective: f64,
}

impl SvrModel {
    /// Number of training samples.
    pub fn training_len(&self) -> usize {
        self.inputs.len()
    }

    /// Dual coefficients `βᵢ = αᵢ - α*ᵢ`, on the standardized target scale.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// RBF width in use.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Predicts the target for a raw feature vector.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let x_std = self.x_stats.apply(x);
        let f_std: f64 = self
            .inputs
            .iter()
            .zip(&self.beta)
            .map(|(xi, b)| b * rbf(xi, &x_std, self.gamma))
            .sum::<f64>()
            + self.bias;
        f_std * self.y_std + self.y_mean
    }

    /// Builds a model from externally computed dual coefficients (used by
    /// the QUBO-annealing trainer, which shares this predict path).
    pub(crate) fn from_parts(prepared: Prepared, beta: Vec<f64>, bias: f64, objective: f64) -> Self {
        SvrModel {
            inputs: prepared.xs,
            beta,
            bias,
            gamma: prepared.gamma,
            x_stats: prepared.x_stats,
            y_mean: prepared.y_mean,
            y_std: prepared.y_std,
            hit_iteration_cap: false,
            dual_objective: objective,
        }
    }
}

/// Trains an ε-SVR on raw features and targets.
pub fn train_svr(xs: &[Vec<f64>], ys: &[f64], params: &SvrParams) -> Result<SvrModel> {
    let prepared = prepare(xs, ys, params)?;
    let gram = rbf_gram(&prepared.xs, prepared.gamma);
    let solution = solve_dual(
        &gram,
        &prepared.ys,
        params.c,
        params.epsilon,
        params.tolerance,
        params.max_pair_updates,
    );
    debug_assert!(
        solution.beta.iter().sum::<f64>().abs() <= 1e-6 * params.c * prepared.ys.len() as f64,
        "equality constraint violated"
    );
    Ok(SvrModel {
        inputs: prepared.xs,
        beta: solution.beta,
        bias: solution.bias,
        gamma: prepared.gamma,
        x_stats: prepared.x_stats,
        y_mean: prepared.y_mean,
        y_std: prepared.y_std,
        hit_iteration_cap: solution.hit_cap,
        dual_objective: solution.objective,
    })
}

/// The box-constrained dual problem [`train_svr`] solves for this data:
/// the RBF Gram matrix of the standardized inputs and the standardized
/// targets. Together with `params.c` and `params.epsilon` these fully
/// determine the QP
///
/// ```text
/// maximize  W(β) = -½ βᵀKβ - ε Σ|βᵢ| + yᵀβ
/// subject to Σβᵢ = 0,  -C ≤ βᵢ ≤ C
/// ```
///
/// so an independent solver can check a trained model's
/// [`SvrModel::dual_objective`] and [`SvrModel::beta`].
pub fn dual_problem(
    xs: &[Vec<f64>],
    ys: &[f64],
    params: &SvrParams,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let prepared = prepare(xs, ys, params)?;
    Ok((rbf_gram(&prepared.xs, prepared.gamma), prepared.ys))
}

/// Leave-one-out estimate of the prediction-error spread: trains `n` models
/// on `n - 1` points each and returns the sample standard deviation of the
/// held-out residuals `yᵢ - f₋ᵢ(xᵢ)`. Needs `n >= 3`.
pub fn loocv_std(xs: &[Vec<f64>], ys: &[f64], params: &SvrParams) -> Result<f64> {
    validate_training_set(xs, ys)?;
    let n = xs.len();
    if n < 3 {
        return Err(Error::Numeric(
            "loocv_std needs at least 3 training points".into(),
        ));
    }
    let mut residuals = Vec::with_capacity(n);
    let mut fold_xs: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    let mut fold_ys: Vec<f64> = Vec::with_capacity(n - 1);
    for i in 0..n {
        fold_xs.clear();
        fold_ys.clear();
        for j in 0..n {
            if j != i {
                fold_xs.push(xs[j].clone());
                fold_ys.push(ys[j]);
            }
        }
        let model = train_svr(&fold_xs, &fold_ys, params)?;
        residuals.push(ys[i] - model.predict(&xs[i]));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt())
}
