//! Independent oracles for the integration tests.
//!
//! Everything here solves the same problems as the production code by a
//! different, brute-force route, so agreement between the two is evidence
//! of correctness rather than of shared bugs:
//!
//! * [`brute_force_svr_dual`] maximizes the ε-SVR dual QP by enumerating
//!   every KKT stationarity class and solving each tiny linear system;
//! * [`exhaustive_qubo_min`] scans all `2ⁿ` bit vectors of a QUBO;
//! * [`qubo_energy_by_definition`] evaluates `bᵀQb` straight from the
//!   matrix definition.

use swiftband::predictor::QuboProblem;

/// Evaluates the ε-SVR dual objective
/// `W(β) = -½ βᵀKβ - ε Σ|βᵢ| + yᵀβ` at `beta`.
pub fn svr_dual_objective(gram: &[Vec<f64>], ys: &[f64], epsilon: f64, beta: &[f64]) -> f64 {
    let mut quad = 0.0;
    for (i, bi) in beta.iter().enumerate() {
        for (j, bj) in beta.iter().enumerate() {
            quad += bi * bj * gram[i][j];
        }
    }
    let tube: f64 = beta.iter().map(|b| b.abs()).sum();
    let fit: f64 = beta.iter().zip(ys).map(|(b, y)| b * y).sum();
    -0.5 * quad - epsilon * tube + fit
}

/// Maximizes the ε-SVR dual
///
/// ```text
/// maximize  W(β) = -½ βᵀKβ - ε Σ|βᵢ| + yᵀβ
/// subject to Σβᵢ = 0,  -C ≤ βᵢ ≤ C
/// ```
///
/// by enumeration: at an optimum every coordinate is either pinned at
/// `-C`, `0` or `+C`, or free with a definite sign, so each of the `5ⁿ`
/// class assignments yields one candidate — the solution of a linear
/// stationarity system. The objective is concave, hence the best feasible
/// candidate is the global maximum. Returns `(β, W(β))`.
pub fn brute_force_svr_dual(
    gram: &[Vec<f64>],
    ys: &[f64],
    c: f64,
    epsilon: f64,
) -> (Vec<f64>, f64) {
    let n = ys.len();
    assert!(
        (1..=6).contains(&n),
        "the enumeration oracle handles 1..=6 points, got {n}"
    );
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut states = vec![0u8; n];
    loop {
        if let Some(beta) = candidate_for_state(gram, ys, c, epsilon, &states) {
            let objective = svr_dual_objective(gram, ys, epsilon, &beta);
            if best.as_ref().is_none_or(|(_, w)| objective > *w) {
                best = Some((beta, objective));
            }
        }
        // Odometer over the 5ⁿ state assignments.
        let mut digit = 0;
        loop {
            if digit == n {
                return best.expect("the all-zero state is always feasible");
            }
            states[digit] += 1;
            if states[digit] < 5 {
                break;
            }
            states[digit] = 0;
            digit += 1;
        }
    }
}

/// States: 0 → `β = -C`, 1 → `β = 0`, 2 → `β = +C`,
/// 3 → free with `β ∈ [0, C]`, 4 → free with `β ∈ [-C, 0]`.
fn candidate_for_state(
    gram: &[Vec<f64>],
    ys: &[f64],
    c: f64,
    epsilon: f64,
    states: &[u8],
) -> Option<Vec<f64>> {
    let n = ys.len();
    let pinned_value = |s: u8| match s {
        0 => -c,
        1 => 0.0,
        2 => c,
        _ => unreachable!("only pinned states have fixed values"),
    };
    let free: Vec<usize> = (0..n).filter(|&i| states[i] >= 3).collect();

    if free.is_empty() {
        let beta: Vec<f64> = states.iter().map(|&s| pinned_value(s)).collect();
        let sum: f64 = beta.iter().sum();
        return (sum.abs() <= 1e-9 * c.max(1.0)).then_some(beta);
    }

    // Unknowns: the free βs plus the equality multiplier b. For a free
    // coordinate with sign s the stationarity condition is
    //   (Kβ)ᵢ + b = yᵢ - s·ε,
    // and feasibility adds Σβ = 0 over all coordinates.
    let m = free.len();
    let mut a = vec![vec![0.0; m + 1]; m + 1];
    let mut rhs = vec![0.0; m + 1];
    for (row, &i) in free.iter().enumerate() {
        for (col, &j) in free.iter().enumerate() {
            a[row][col] = gram[i][j];
        }
        a[row][m] = 1.0;
        let sign = if states[i] == 3 { 1.0 } else { -1.0 };
        let mut value = ys[i] - sign * epsilon;
        for j in 0..n {
            if states[j] < 3 {
                value -= gram[i][j] * pinned_value(states[j]);
            }
        }
        rhs[row] = value;
    }
    for col in 0..m {
        a[m][col] = 1.0;
    }
    rhs[m] = -(0..n)
        .filter(|&j| states[j] < 3)
        .map(|j| pinned_value(states[j]))
        .sum::<f64>();

    let solution = solve_linear(a, rhs)?;
    let mut beta: Vec<f64> = (0..n)
        .map(|i| if states[i] < 3 { pinned_value(states[i]) } else { 0.0 })
        .collect();
    for (row, &i) in free.iter().enumerate() {
        let v = solution[row];
        if !v.is_finite() {
            return None;
        }
        let in_box = if states[i] == 3 {
            (0.0..=c).contains(&v)
        } else {
            (-c..=0.0).contains(&v)
        };
        if !in_box {
            return None;
        }
        beta[i] = v;
    }
    Some(beta)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot_row][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// `bᵀQb` computed straight from the matrix definition.
pub fn qubo_energy_by_definition(qubo: &QuboProblem, bits: &[u8]) -> f64 {
    let n = qubo.num_bits();
    assert_eq!(bits.len(), n, "bit vector length must match the matrix");
    let mut acc = 0.0;
    for t in 0..n {
        if bits[t] == 0 {
            continue;
        }
        for u in 0..n {
            if bits[u] != 0 {
                acc += qubo.coefficient(t, u);
            }
        }
    }
    acc
}

/// Scans every bit vector of a (small) QUBO and returns the minimizing
/// assignment with its energy.
pub fn exhaustive_qubo_min(qubo: &QuboProblem) -> (Vec<u8>, f64) {
    let n = qubo.num_bits();
    assert!(n <= 16, "exhaustive scan is for at most 16 bits, got {n}");
    let mut best_bits = vec![0u8; n];
    let mut best_energy = qubo_energy_by_definition(qubo, &best_bits);
    for word in 1u32..(1u32 << n) {
        let bits: Vec<u8> = (0..n).map(|t| ((word >> t) & 1) as u8).collect();
        let energy = qubo_energy_by_definition(qubo, &bits);
        if energy < best_energy {
            best_energy = energy;
            best_bits = bits;
        }
    }
    (best_bits, best_energy)
}
