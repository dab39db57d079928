//! Exact discrete optimal transport by the transportation (network) simplex.
//!
//! The basis is a spanning tree of the bipartite graph rows ∪ columns with
//! `m + n - 1` cells. The north-west corner rule gives the initial tree,
//! potentials are propagated along the tree, entering cells are chosen by
//! block pricing and the leaving cell by the ratio test along the unique
//! tree cycle. Every solution is re-certified before it is returned.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense cost matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "cost matrix has {} entries, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::input("ragged cost matrix"));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A coupling of two probability vectors and its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    /// Nonzero entries `(i, j, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub objective: f64,
}

/// Tolerance of the post-solve certificate.
pub const PLAN_TOLERANCE: f64 = 1e-10;

impl TransportPlan {
    /// Check marginals, nonnegativity and the objective against `cost`.
    pub fn certify(&self, cost: &CostMatrix) -> Result<()> {
        let mut rows = vec![0.0; self.row_marginal.len()];
        let mut cols = vec![0.0; self.col_marginal.len()];
        let mut objective = 0.0;
        for &(i, j, x) in &self.entries {
            if x < 0.0 || i >= rows.len() || j >= cols.len() {
                return Err(Error::Resource(format!("invalid plan entry ({i}, {j}, {x})")));
            }
            rows[i] += x;
            cols[j] += x;
            objective += x * cost.get(i, j);
        }
        let worst_row = rows.iter().zip(&self.row_marginal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let worst_col = cols.iter().zip(&self.col_marginal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if worst_row > PLAN_TOLERANCE || worst_col > PLAN_TOLERANCE {
            return Err(Error::Resource(format!(
                "plan marginals off by {worst_row:e} (rows) / {worst_col:e} (columns)"
            )));
        }
        if (objective - self.objective).abs() > PLAN_TOLERANCE * (1.0 + objective.abs()) {
            return Err(Error::Resource(format!(
                "plan objective {} disagrees with recomputed {objective}",
                self.objective
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_probability(w: &[f64], what: &str) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::input(format!("{what} weights are empty")));
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::input(format!("{what} weights must be finite and nonnegative")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("{what} weights sum to {total}, not 1")));
    }
    Ok(total)
}

pub(crate) fn check_problem(cost: &CostMatrix, mu: &[f64], nu: &[f64]) -> Result<()> {
    if cost.rows != mu.len() || cost.cols != nu.len() {
        return Err(Error::input(format!(
            "cost is {} x {} but marginals have {} and {} entries",
            cost.rows,
            cost.cols,
            mu.len(),
            nu.len()
        )));
    }
    if cost.data.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::input("cost entries must be finite and nonnegative"));
    }
    check_probability(mu, "row")?;
    check_probability(nu, "column")?;
    Ok(())
}

/// Exact W1 for a discrete problem; returns the value and an optimal plan.
pub fn w1_discrete(cost: &CostMatrix, mu: &[f64], nu: &[f64]) -> Result<(f64, TransportPlan)> {
    check_problem(cost, mu, nu)?;
    let plan = NetworkSimplex::new(cost, mu, nu).solve()?;
    plan.certify(cost)?;
    Ok((plan.objective, plan))
}

struct NetworkSimplex<'a> {
    cost: &'a CostMatrix,
    m: usize,
    n: usize,
    /// basic cells `(row, col, flow)`
    cells: Vec<(usize, usize, f64)>,
    /// cell indices incident to each node; rows are `0..m`, columns `m..m+n`
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    in_basis: Vec<bool>,
    mu: &'a [f64],
    nu: &'a [f64],
}

impl<'a> NetworkSimplex<'a> {
    fn new(cost: &'a CostMatrix, mu: &'a [f64], nu: &'a [f64]) -> Self {
        let (m, n) = (mu.len(), nu.len());
        let mut s = NetworkSimplex {
            cost,
            m,
            n,
            cells: Vec::with_capacity(m + n - 1),
            adj: vec![Vec::new(); m + n],
            u: vec![0.0; m],
            v: vec![0.0; n],
            in_basis: vec![false; m * n],
            mu,
            nu,
        };
        s.northwest_corner();
        s
    }

    fn northwest_corner(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut supply = self.mu.to_vec();
        let mut demand = self.nu.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let last = i == m - 1 && j == n - 1;
            let x = if last { supply[i].max(0.0) } else { supply[i].min(demand[j]).max(0.0) };
            supply[i] -= x;
            demand[j] -= x;
            self.add_cell(i, j, x);
            if last {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    fn add_cell(&mut self, i: usize, j: usize, x: f64) {
        let idx = self.cells.len();
        self.cells.push((i, j, x));
        self.adj[i].push(idx);
        self.adj[self.m + j].push(idx);
        self.in_basis[i * self.n + j] = true;
    }

    fn replace_cell(&mut self, idx: usize, i: usize, j: usize, x: f64) {
        let (oi, oj, _) = self.cells[idx];
        let m = self.m;
        self.adj[oi].retain(|&c| c != idx);
        self.adj[m + oj].retain(|&c| c != idx);
        self.in_basis[oi * self.n + oj] = false;
        self.cells[idx] = (i, j, x);
        self.adj[i].push(idx);
        self.adj[m + j].push(idx);
        self.in_basis[i * self.n + j] = true;
    }

    fn potentials(&mut self) {
        let m = self.m;
        let mut seen = vec![false; m + self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &c in &self.adj[node] {
                let (i, j, _) = self.cells[c];
                let other = if node < m { m + j } else { i };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                let cij = self.cost.get(i, j);
                if node < m {
                    self.v[j] = cij - self.u[i];
                } else {
                    self.u[i] = cij - self.v[j];
                }
                stack.push(other);
            }
        }
    }

    /// Tree path from row `p` to column `q` as a list of cell indices.
    fn path(&self, p: usize, q: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut via = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let target = self.m + q;
        let mut queue = VecDeque::from([p]);
        seen[p] = true;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &c in &self.adj[node] {
                let (i, j, _) = self.cells[c];
                let other = if node < self.m { self.m + j } else { i };
                if !seen[other] {
                    seen[other] = true;
                    via[other] = c;
                    queue.push_back(other);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != p {
            let c = via[node];
            cells.push(c);
            let (i, j, _) = self.cells[c];
            node = if node < self.m { self.m + j } else { i };
        }
        cells.reverse();
        cells
    }

    fn solve(mut self) -> Result<TransportPlan> {
        let (m, n) = (self.m, self.n);
        let tol = -1e-12 * (1.0 + self.cost.max_abs());
        let total = m * n;
        let block = ((total as f64).sqrt().ceil() as usize).max(16).min(total.max(1));
        let mut start = 0usize;
        let cap = 50 * total + 1000;
        let mut iterations = 0usize;
        loop {
            self.potentials();
            // block pricing over cells in row-major order, rotating start
            let mut best: Option<(usize, f64)> = None;
            let mut scanned = 0usize;
            let mut pos = start;
            while scanned < total {
                let stop = (scanned + block).min(total);
                while scanned < stop {
                    if !self.in_basis[pos] {
                        let (i, j) = (pos / n, pos % n);
                        let r = self.cost.get(i, j) - self.u[i] - self.v[j];
                        if r < tol && best.is_none_or(|b| r < b.1) {
                            best = Some((pos, r));
                        }
                    }
                    pos += 1;
                    if pos == total {
                        pos = 0;
                    }
                    scanned += 1;
                }
                if best.is_some() {
                    break;
                }
            }
            start = pos;
            let Some((enter, _)) = best else { break };
            iterations += 1;
            if iterations > cap {
                return Err(Error::Resource(format!("network simplex exceeded {cap} pivots")));
            }
            let (p, q) = (enter / n, enter % n);
            let path = self.path(p, q);
            // path from row p to column q alternates minus, plus, minus, ...
            let mut leave = usize::MAX;
            let mut theta = f64::INFINITY;
            for (k, &c) in path.iter().enumerate() {
                if k % 2 == 0 && self.cells[c].2 < theta {
                    theta = self.cells[c].2;
                    leave = c;
                }
            }
            let theta = theta.max(0.0);
            for (k, &c) in path.iter().enumerate() {
                let x = &mut self.cells[c].2;
                if k % 2 == 0 {
                    *x = (*x - theta).max(0.0);
                } else {
                    *x += theta;
                }
            }
            self.replace_cell(leave, p, q, theta);
        }
        let mut entries: Vec<(usize, usize, f64)> = self.cells.iter().copied().filter(|c| c.2 > 0.0).collect();
        entries.sort_by_key(|c| (c.0, c.1));
        let objective = entries.iter().map(|&(i, j, x)| x * self.cost.get(i, j)).sum();
        Ok(TransportPlan { row_marginal: self.mu.to_vec(), col_marginal: self.nu.to_vec(), entries, objective })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let c = CostMatrix::from_rows(&[vec![0.7]]).unwrap();
        let (v, plan) = w1_discrete(&c, &[1.0], &[1.0]).unwrap();
        assert_eq!(v, 0.7);
        assert_eq!(plan.entries, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn identical_marginals_zero_diagonal() {
        let n = 6;
        let c = CostMatrix::from_fn(n, n, |i, j| (i as f64 - j as f64).abs());
        let w = vec![1.0 / n as f64; n];
        let (v, _) = w1_discrete(&c, &w, &w).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn matches_one_dimensional_answer() {
        // points 0, 1, 2 vs 0.5, 1.5, 2.5 on a line: cost 0.5
        let c = CostMatrix::from_fn(3, 3, |i, j| (i as f64 - (j as f64 + 0.5)).abs());
        let w = vec![1.0 / 3.0; 3];
        let (v, _) = w1_discrete(&c, &w, &w).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let c = CostMatrix::from_fn(2, 3, |_, _| 1.0);
        assert!(matches!(w1_discrete(&c, &[0.5, 0.5], &[0.5, 0.5]), Err(Error::Input(_))));
    }

    #[test]
    fn handles_zero_weights_and_rectangles() {
        let c = CostMatrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 / 4.0);
        let (v, plan) = w1_discrete(&c, &[0.0, 0.6, 0.4], &[0.2, 0.0, 0.3, 0.25, 0.25]).unwrap();
        assert!(v >= 0.0);
        plan.certify(&c).unwrap();
    }
}
