//! Exact W1 on the truncated binary shift via optimal transport on the
//! cylinder tree.
//!
//! Leaves are words of length `D`. The edge above a cylinder of length `j`
//! has length `2^-(j+1)` for `j < D` and `2^-D` for `j = D`, so that the path
//! length between two words first differing at index `k` is exactly `2^-k`:
//! the tree metric coincides with the shift metric and W1 is
//! `Σ_cylinders edge · |mu(cyl) - nu(cyl)|`.

use crate::error::{Error, Result};
use crate::phase_space::Point;

use super::measure::EmpiricalMeasure;

/// Length of the edge above cylinders of length `j` (`1 <= j <= depth`).
pub fn edge_length(j: u32, depth: u32) -> f64 {
    if j < depth {
        (2.0f64).powi(-(j as i32) - 1)
    } else {
        (2.0f64).powi(-(depth as i32))
    }
}

pub fn w1_shift(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let (Some(da), Some(db)) = (mu.space().shift_depth(), nu.space().shift_depth()) else {
        return Err(Error::input("w1_shift needs two measures on a binary shift"));
    };
    if da != db {
        return Err(Error::input(format!("shift depth mismatch: {da} vs {db}")));
    }
    Ok(shift_unchecked(mu, nu, da))
}

pub(crate) fn shift_unchecked(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, depth: u32) -> f64 {
    // signed mass per leaf, sorted by word
    let word = |p: &Point| match *p {
        Point::Word(w) => w,
        _ => 0,
    };
    let (a, b) = (mu.atoms(), nu.atoms());
    let mut leaves: Vec<(u64, f64)> = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let wa = a.get(i).map_or(u64::MAX, |t| word(&t.point));
        let wb = b.get(j).map_or(u64::MAX, |t| word(&t.point));
        let w = wa.min(wb);
        let mut m = 0.0;
        if wa == w && i < a.len() {
            m += a[i].weight;
            i += 1;
        }
        if wb == w && j < b.len() {
            m -= b[j].weight;
            j += 1;
        }
        leaves.push((w, m));
    }
    let mut total = 0.0;
    for len in 1..=depth {
        let shift = depth - len;
        let edge = edge_length(len, depth);
        let mut k = 0;
        while k < leaves.len() {
            let prefix = leaves[k].0 >> shift;
            let mut diff = 0.0;
            while k < leaves.len() && leaves[k].0 >> shift == prefix {
                diff += leaves[k].1;
                k += 1;
            }
            total += edge * diff.abs();
        }
    }
    total
}
