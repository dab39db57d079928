//! Entropic optimal transport with a certified two-sided bracket.
//!
//! Log-domain Sinkhorn iterations produce dual potentials and an approximate
//! plan. The upper bound is the cost of that plan after rounding it onto the
//! transport polytope; the lower bound is the dual objective of the potentials
//! after a double c-transform, which makes them dual feasible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::simplex::{check_problem, CostMatrix};

/// Result of [`w1_entropic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropicBracket {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// False when `max_iters` ran out before the marginals matched.
    pub converged: bool,
}

impl EntropicBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Marginal error (L1) at which Sinkhorn stops.
pub const SINKHORN_TOLERANCE: f64 = 1e-12;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Bracket `lower <= W1 <= upper` from entropic regularization `epsilon`.
pub fn w1_entropic(
    cost: &CostMatrix,
    mu: &[f64],
    nu: &[f64],
    epsilon: f64,
    max_iters: usize,
) -> Result<EntropicBracket> {
    check_problem(cost, mu, nu)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
    }
    // restrict to the supports of the marginals
    let rows: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let cols: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    let (m, n) = (rows.len(), cols.len());
    let c = |a: usize, b: usize| cost.get(rows[a], cols[b]);
    let log_a: Vec<f64> = rows.iter().map(|&i| mu[i].ln()).collect();
    let log_b: Vec<f64> = cols.iter().map(|&j| nu[j].ln()).collect();
    let a: Vec<f64> = rows.iter().map(|&i| mu[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| nu[j]).collect();

    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        for i in 0..m {
            f[i] = epsilon * (log_a[i] - log_sum_exp((0..n).map(|j| (g[j] - c(i, j)) / epsilon)));
        }
        for j in 0..n {
            g[j] = epsilon * (log_b[j] - log_sum_exp((0..m).map(|i| (f[i] - c(i, j)) / epsilon)));
        }
        // columns are exact after the g update; measure the row error
        let err: f64 = (0..m)
            .map(|i| {
                let r: f64 = (0..n).map(|j| ((f[i] + g[j] - c(i, j)) / epsilon).exp()).sum();
                (r - a[i]).abs()
            })
            .sum();
        if err <= SINKHORN_TOLERANCE {
            converged = true;
            break;
        }
    }

    let mut plan: Vec<f64> = Vec::with_capacity(m * n);
    for (i, fi) in f.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            plan.push(((fi + gj - c(i, j)) / epsilon).exp());
        }
    }
    round_to_polytope(&mut plan, &a, &b);
    let mut upper = 0.0;
    for i in 0..m {
        for j in 0..n {
            upper += plan[i * n + j] * c(i, j);
        }
    }

    // double c-transform: f_i = min_j (c_ij - g_j), then g_j = min_i (c_ij - f_i)
    let f2: Vec<f64> = (0..m).map(|i| (0..n).map(|j| c(i, j) - g[j]).fold(f64::INFINITY, f64::min)).collect();
    let g2: Vec<f64> = (0..n).map(|j| (0..m).map(|i| c(i, j) - f2[i]).fold(f64::INFINITY, f64::min)).collect();
    let lower: f64 = a.iter().zip(&f2).map(|(x, y)| x * y).sum::<f64>() + b.iter().zip(&g2).map(|(x, y)| x * y).sum::<f64>();

    // allowance for rounding in the two sums
    let slack = 1e-12 * (1.0 + cost.max_abs());
    Ok(EntropicBracket { lower: (lower - slack).max(0.0), upper: upper + slack, iterations, converged })
}

/// Rounding of an approximate plan onto the couplings of `(a, b)`: scale
/// down over-full rows, then over-full columns, then add the rank-one
/// correction of the remaining deficits.
fn round_to_polytope(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, n) = (a.len(), b.len());
    for i in 0..m {
        let r: f64 = plan[i * n..(i + 1) * n].iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            plan[i * n..(i + 1) * n].iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| plan[i * n + j]).sum();
        if col > b[j] {
            let s = b[j] / col;
            (0..m).for_each(|i| plan[i * n + j] *= s);
        }
    }
    let err_r: Vec<f64> = (0..m).map(|i| (a[i] - plan[i * n..(i + 1) * n].iter().sum::<f64>()).max(0.0)).collect();
    let err_c: Vec<f64> = (0..n).map(|j| (b[j] - (0..m).map(|i| plan[i * n + j]).sum::<f64>()).max(0.0)).collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..n {
                plan[i * n + j] += err_r[i] * err_c[j] / total;
            }
        }
    }
}
