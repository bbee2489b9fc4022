//! Binary encoding of the SVR dual as a quadratic unconstrained binary
//! optimization (QUBO) problem.
//!
//! Each dual coefficient pair `(αᵢ, α*ᵢ)` is expanded over `K` bits with
//! weights `w_k = C·2ᵏ/(2ᴷ-1)`, so an all-ones pattern reproduces `C`
//! exactly. The equality constraint `Σ (αᵢ-α*ᵢ) = 0` becomes a quadratic
//! penalty `λ (Σ βᵢ)²` folded into the matrix. The encoding has zero
//! constant offset: the all-zeros vector has energy `0`, and for every bit
//! vector `b`,
//!
//! ```text
//! bᵀQb = -W(α, α*) + λ (Σ βᵢ)²
//! ```
//!
//! where `(α, α*)` is the decoding of `b` and `W` is the dual objective the
//! pairwise solver maximizes. Minimizing the energy therefore maximizes the
//! penalized dual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::anneal::{simulated_anneal, AnnealSchedule};
use crate::predictor::svr::{prepare, rbf_gram, Prepared, SvrModel, SvrParams};

/// A symmetric QUBO matrix; the energy of a bit vector `b` is `bᵀQb`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    q: Vec<Vec<f64>>,
}

impl QuboProblem {
    /// Wraps a square, symmetric, finite matrix.
    pub fn from_symmetric(q: Vec<Vec<f64>>) -> Result<Self> {
        let n = q.len();
        for (i, row) in q.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Numeric(format!(
                    "qubo: row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(*v));
                }
                if (v - q[j][i]).abs() > 1e-12 {
                    return Err(Error::Numeric(format!(
                        "qubo: matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(QuboProblem { q })
    }

    pub fn num_bits(&self) -> usize {
        self.q.len()
    }

    pub fn coefficient(&self, t: usize, u: usize) -> f64 {
        self.q[t][u]
    }

    pub(crate) fn row(&self, t: usize) -> &[f64] {
        &self.q[t]
    }

    /// Energy `bᵀQb` of a 0/1 vector.
    pub fn energy(&self, bits: &[u8]) -> f64 {
        assert_eq!(bits.len(), self.num_bits(), "bit vector length mismatch");
        let mut e = 0.0;
        for (t, &bt) in bits.iter().enumerate() {
            if bt == 0 {
                continue;
            }
            e += self.q[t][t];
            for (u, &bu) in bits.iter().enumerate().skip(t + 1) {
                if bu != 0 {
                    e += 2.0 * self.q[t][u];
                }
            }
        }
        e
    }
}

/// Knobs of the QUBO/annealing trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QsvrParams {
    /// Bits per dual variable.
    pub bits: u32,
    /// Training is restricted to at most this many of the most recent
    /// samples, keeping the bit count bounded.
    pub sample_cap: usize,
    /// Penalty weight `λ` for the equality constraint; `None` picks
    /// `2 · max(max|y|, 1) · (2ᴷ−1) / C`, which prices one quantization
    /// step of constraint violation at about twice the largest one-step
    /// fit gain regardless of the data scale.
    pub penalty: Option<f64>,
    /// Annealing schedule used to minimize the energy.
    pub schedule: AnnealSchedule,
}

impl Default for QsvrParams {
    fn default() -> Self {
        QsvrParams {
            bits: 3,
            sample_cap: 20,
            penalty: None,
            schedule: AnnealSchedule::default(),
        }
    }
}

impl QsvrParams {
    fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 16 {
            return Err(Error::Config("qsvr: bits must be in 1..=16".into()));
        }
        if self.sample_cap < 2 {
            return Err(Error::Config("qsvr: sample_cap must be at least 2".into()));
        }
        if let Some(p) = self.penalty {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Config("qsvr: penalty must be finite and >= 0".into()));
            }
        }
        self.schedule.validate()
    }
}

/// Decoded dual coefficients for one bit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QsvrSolution {
    pub alphas: Vec<f64>,
    pub alpha_stars: Vec<f64>,
    /// `βᵢ = αᵢ - α*ᵢ`.
    pub beta: Vec<f64>,
}

/// A QUBO matrix together with everything needed to decode bit vectors and
/// evaluate the dual objective they correspond to.
pub struct QsvrEncoding {
    pub qubo: QuboProblem,
    /// Number of training samples encoded.
    pub n_samples: usize,
    /// Bits per dual variable.
    pub bits: u32,
    pub c: f64,
    pub epsilon: f64,
    /// Equality-constraint penalty weight in use.
    pub lambda: f64,
    /// Kernel matrix of the standardized training inputs.
    pub gram: Vec<Vec<f64>>,
    /// Standardized training targets.
    pub ys: Vec<f64>,
    prepared: Prepared,
}

impl QsvrEncoding {
    /// Bit-weight `w_k = C·2ᵏ/(2ᴷ-1)`.
    fn weight(&self, k: u32) -> f64 {
        bit_weight(self.c, self.bits, k)
    }

    /// Decodes a bit vector into dual coefficients.
    pub fn decode(&self, bits: &[u8]) -> Result<QsvrSolution> {
        let expected = self.qubo.num_bits();
        if bits.len() != expected {
            return Err(Error::Numeric(format!(
                "qsvr decode: got {} bits, expected {expected}",
                bits.len()
            )));
        }
        let k = self.bits as usize;
        let mut alphas = Vec::with_capacity(self.n_samples);
        let mut alpha_stars = Vec::with_capacity(self.n_samples);
        for i in 0..self.n_samples {
            let start = i * 2 * k;
            let mut a = 0.0;
            let mut a_star = 0.0;
            for b in 0..k {
                if bits[start + b] != 0 {
                    a += self.weight(b as u32);
                }
                if bits[start + k + b] != 0 {
                    a_star += self.weight(b as u32);
                }
            }
            alphas.push(a);
            alpha_stars.push(a_star);
        }
        let beta = alphas
            .iter()
            .zip(&alpha_stars)
            .map(|(a, s)| a - s)
            .collect();
        Ok(QsvrSolution {
            alphas,
            alpha_stars,
            beta,
        })
    }

    /// Evaluates `-W(α, α*) + λ (Σ βᵢ)²` directly from the dual objective,
    /// without going through the matrix. For any bit vector this equals the
    /// QUBO energy up to rounding.
    pub fn penalized_negated_dual(&self, sol: &QsvrSolution) -> f64 {
        let mut quad = 0.0;
        for (i, bi) in sol.beta.iter().enumerate() {
            for (j, bj) in sol.beta.iter().enumerate() {
                quad += bi * bj * self.gram[i][j];
            }
        }
        let tube: f64 = sol
            .alphas
            .iter()
            .zip(&sol.alpha_stars)
            .map(|(a, s)| a + s)
            .sum();
        let fit: f64 = sol.beta.iter().zip(&self.ys).map(|(b, y)| b * y).sum();
        let violation: f64 = sol.beta.iter().sum();
        0.5 * quad + self.epsilon * tube - fit + self.lambda * violation * violation
    }

    /// Turns a bit vector into a trained model, deriving the bias from the
    /// tube conditions of near-interior coefficients, with a median-residual
    /// fallback when every coefficient sits on the box boundary.
    pub fn into_model(self, bits: &[u8]) -> Result<SvrModel> {
        let sol = self.decode(bits)?;
        let n = self.n_samples;
        let kbeta: Vec<f64> = (0..n)
            .map(|i| {
                sol.beta
                    .iter()
                    .zip(&self.gram[i])
                    .map(|(b, k)| b * k)
                    .sum::<f64>()
            })
            .collect();
        let margin = 1e-9 * self.c;
        let mut candidates = Vec::new();
        for i in 0..n {
            let interior_up = sol.alphas[i] > margin
                && sol.alphas[i] < self.c - margin
                && sol.alpha_stars[i] <= margin;
            let interior_down = sol.alpha_stars[i] > margin
                && sol.alpha_stars[i] < self.c - margin
                && sol.alphas[i] <= margin;
            if interior_up {
                candidates.push(self.ys[i] - kbeta[i] - self.epsilon);
            } else if interior_down {
                candidates.push(self.ys[i] - kbeta[i] + self.epsilon);
            }
        }
        let bias = if candidates.is_empty() {
            let mut residuals: Vec<f64> = (0..n).map(|i| self.ys[i] - kbeta[i]).collect();
            residuals.sort_by(f64::total_cmp);
            let mid = residuals.len() / 2;
            if residuals.len() % 2 == 1 {
                residuals[mid]
            } else {
                0.5 * (residuals[mid - 1] + residuals[mid])
            }
        } else {
            candidates.iter().sum::<f64>() / candidates.len() as f64
        };

        let quad: f64 = sol.beta.iter().zip(&kbeta).map(|(b, kb)| b * kb).sum();
        let tube: f64 = sol
            .alphas
            .iter()
            .zip(&sol.alpha_stars)
            .map(|(a, s)| a + s)
            .sum();
        let fit: f64 = sol.beta.iter().zip(&self.ys).map(|(b, y)| b * y).sum();
        let objective = -0.5 * quad - self.epsilon * tube + fit;

        Ok(SvrModel::from_parts(self.prepared, sol.beta, bias, objective))
    }
}

fn bit_weight(c: f64, bits: u32, k: u32) -> f64 {
    let denom = ((1u64 << bits) - 1) as f64;
    c * (1u64 << k) as f64 / denom
}

/// Encodes the dual of an ε-SVR over a raw training set as a QUBO problem.
pub fn svr_to_qubo(
    xs: &[Vec<f64>],
    ys: &[f64],
    svr: &SvrParams,
    qsvr: &QsvrParams,
) -> Result<QsvrEncoding> {
    qsvr.validate()?;
    let prepared = prepare(xs, ys, svr)?;
    let gram = rbf_gram(&prepared.xs, prepared.gamma);
    let n = prepared.ys.len();
    let k = qsvr.bits as usize;
    let num_bits = 2 * k * n;

    let max_abs_y = prepared.ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let lambda = qsvr.penalty.unwrap_or_else(|| {
        // Scale-invariant default: one quantization step of constraint
        // violation (the smallest weight w₀ = C/(2ᴷ-1)) must cost about
        // twice the largest one-step fit gain (≈ w₀·max|y|), so
        // λ·w₀² = 2·w₀·max|y|. A penalty that grows with C instead
        // freezes single-bit-flip annealing: every walk through a
        // transiently infeasible state becomes unacceptably expensive
        // long before the fit terms are settled, and the search never
        // leaves the all-zeros state.
        2.0 * max_abs_y.max(1.0) * (((1u64 << qsvr.bits) - 1) as f64) / svr.c
    });

    // Bit t belongs to sample i(t) = t / 2K; within a sample the first K
    // bits raise α and the next K raise α*.
    let sample_of = |t: usize| t / (2 * k);
    let sign_of = |t: usize| if t % (2 * k) < k { 1.0 } else { -1.0 };
    let weight_of = |t: usize| bit_weight(svr.c, qsvr.bits, (t % k) as u32);

    let mut q = vec![vec![0.0; num_bits]; num_bits];
    for t in 0..num_bits {
        let (i, st, wt) = (sample_of(t), sign_of(t), weight_of(t));
        q[t][t] = wt * wt * (0.5 * gram[i][i] + lambda) + wt * (svr.epsilon - st * prepared.ys[i]);
        for u in 0..t {
            let (ju, su, wu) = (sample_of(u), sign_of(u), weight_of(u));
            let coeff = st * su * wt * wu * (0.5 * gram[i][ju] + lambda);
            q[t][u] = coeff;
            q[u][t] = coeff;
        }
    }

    Ok(QsvrEncoding {
        qubo: QuboProblem { q },
        n_samples: n,
        bits: qsvr.bits,
        c: svr.c,
        epsilon: svr.epsilon,
        lambda,
        gram,
        ys: prepared.ys.clone(),
        prepared,
    })
}

/// Trains a regressor by annealing the QUBO encoding of the dual. Only the
/// most recent `sample_cap` samples are used. Deterministic per seed.
pub fn train_qsvr(
    xs: &[Vec<f64>],
    ys: &[f64],
    svr: &SvrParams,
    qsvr: &QsvrParams,
    seed: u64,
) -> Result<SvrModel> {
    qsvr.validate()?;
    let start = xs.len().saturating_sub(qsvr.sample_cap);
    let xs = &xs[start..];
    let ys = &ys[start..];
    let encoding = svr_to_qubo(xs, ys, svr, qsvr)?;
    let outcome = simulated_anneal(&encoding.qubo, &qsvr.schedule, seed);
    encoding.into_model(&outcome.bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_problem(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i % 2) as f64]).collect();
        let ys: Vec<f64> = (0..n).map(|i| 0.5 * i as f64 - 0.2).collect();
        (xs, ys)
    }

    #[test]
    fn all_zero_bits_have_zero_energy() {
        let (xs, ys) = toy_problem(3);
        let enc = svr_to_qubo(&xs, &ys, &SvrParams::default(), &QsvrParams::default()).unwrap();
        let zeros = vec![0u8; enc.qubo.num_bits()];
        assert_eq!(enc.qubo.energy(&zeros), 0.0);
    }

    #[test]
    fn single_bit_energy_equals_diagonal() {
        let (xs, ys) = toy_problem(2);
        let enc = svr_to_qubo(&xs, &ys, &SvrParams::default(), &QsvrParams::default()).unwrap();
        for t in 0..enc.qubo.num_bits() {
            let mut bits = vec![0u8; enc.qubo.num_bits()];
            bits[t] = 1;
            assert_abs_diff_eq!(
                enc.qubo.energy(&bits),
                enc.qubo.coefficient(t, t),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn energy_matches_penalized_dual_on_random_vectors() {
        let (xs, ys) = toy_problem(3);
        let qsvr = QsvrParams {
            bits: 2,
            ..QsvrParams::default()
        };
        let enc = svr_to_qubo(&xs, &ys, &SvrParams::default(), &qsvr).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let bits: Vec<u8> = (0..enc.qubo.num_bits())
                .map(|_| rng.random_range(0..=1u8))
                .collect();
            let sol = enc.decode(&bits).unwrap();
            let direct = enc.penalized_negated_dual(&sol);
            let via_matrix = enc.qubo.energy(&bits);
            assert_abs_diff_eq!(direct, via_matrix, epsilon = 1e-9);
        }
    }

    #[test]
    fn all_ones_decode_to_the_box_corner() {
        let (xs, ys) = toy_problem(2);
        let svr = SvrParams {
            c: 4.0,
            ..SvrParams::default()
        };
        let enc = svr_to_qubo(&xs, &ys, &svr, &QsvrParams::default()).unwrap();
        let ones = vec![1u8; enc.qubo.num_bits()];
        let sol = enc.decode(&ones).unwrap();
        for (a, s) in sol.alphas.iter().zip(&sol.alpha_stars) {
            assert_abs_diff_eq!(*a, 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(*s, 4.0, epsilon = 1e-12);
        }
        assert!(sol.beta.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn weights_sum_to_c_for_various_bit_counts() {
        for bits in 1..=8u32 {
            let total: f64 = (0..bits).map(|k| bit_weight(10.0, bits, k)).sum();
            assert_abs_diff_eq!(total, 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trained_model_is_deterministic_per_seed() {
        let (xs, ys) = toy_problem(6);
        let svr = SvrParams::default();
        let qsvr = QsvrParams::default();
        let m1 = train_qsvr(&xs, &ys, &svr, &qsvr, 42).unwrap();
        let m2 = train_qsvr(&xs, &ys, &svr, &qsvr, 42).unwrap();
        for x in &xs {
            assert_eq!(m1.predict(x), m2.predict(x));
        }
    }

    #[test]
    fn sample_cap_keeps_only_the_most_recent_points() {
        let (mut xs, mut ys) = toy_problem(25);
        // Poison the oldest points; the cap must drop them.
        for i in 0..5 {
            xs[i] = vec![1e6, 1e6];
            ys[i] = 1e6;
        }
        let qsvr = QsvrParams {
            sample_cap: 20,
            ..QsvrParams::default()
        };
        let model = train_qsvr(&xs, &ys, &SvrParams::default(), &qsvr, 7).unwrap();
        assert_eq!(model.training_len(), 20);
        let f = model.predict(&xs[24]);
        assert!(f.abs() < 100.0, "poisoned points leaked into training: {f}");
    }

    #[test]
    fn fits_a_small_smooth_target_reasonably() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.8 * x[0]).collect();
        let svr = SvrParams {
            epsilon: 0.01,
            ..SvrParams::default()
        };
        let model = train_qsvr(&xs, &ys, &svr, &QsvrParams::default(), 3).unwrap();
        let mut worst = 0.0f64;
        for (x, y) in xs.iter().zip(&ys) {
            worst = worst.max((model.predict(x) - y).abs());
        }
        assert!(worst < 0.35, "worst absolute error {worst}");
    }

    #[test]
    fn rejects_bad_knobs() {
        let (xs, ys) = toy_problem(3);
        let bad_bits = QsvrParams {
            bits: 0,
            ..QsvrParams::default()
        };
        assert!(svr_to_qubo(&xs, &ys, &SvrParams::default(), &bad_bits).is_err());
        let bad_cap = QsvrParams {
            sample_cap: 1,
            ..QsvrParams::default()
        };
        assert!(train_qsvr(&xs, &ys, &SvrParams::default(), &bad_cap, 0).is_err());
    }
}
