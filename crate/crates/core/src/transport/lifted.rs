//! W1 between measures of measures, with W1 between atom measures as the
//! ground cost.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::measure::{EmpiricalMeasure, MetaMeasure};
use super::simplex::{w1_discrete, CostMatrix, TransportPlan};
use super::w1;

/// Default bound on the number of atoms per side.
pub const DEFAULT_ATOM_CAP: usize = 512;

/// Value, ground-distance matrix and optimal outer plan.
#[derive(Clone, Debug)]
pub struct LiftedSolution {
    pub value: f64,
    pub ground: CostMatrix,
    pub plan: Option<TransportPlan>,
}

/// Lifted distance with the default cap.
pub fn lifted_w1(a: &MetaMeasure, b: &MetaMeasure) -> Result<f64> {
    Ok(lifted_w1_detailed(a, b, DEFAULT_ATOM_CAP)?.value)
}

/// Pairwise W1 between the atoms of two metas, filled in parallel.
pub fn ground_matrix(a: &MetaMeasure, b: &MetaMeasure) -> Result<CostMatrix> {
    let (m, n) = (a.len(), b.len());
    let data: Vec<f64> = (0..m * n)
        .into_par_iter()
        .map(|k| w1(&a.atoms()[k / n].0, &b.atoms()[k % n].0))
        .collect::<Result<Vec<f64>>>()?;
    CostMatrix::new(m, n, data)
}

pub fn lifted_w1_detailed(a: &MetaMeasure, b: &MetaMeasure, cap: usize) -> Result<LiftedSolution> {
    if a.space() != b.space() {
        return Err(Error::input(format!("meta-measures live on {} and {}", a.space(), b.space())));
    }
    if a.len() > cap || b.len() > cap {
        return Err(Error::Resource(format!(
            "lifted W1 with {} x {} atoms exceeds the cap of {cap} per side; coarsen the atom measures first",
            a.len(),
            b.len()
        )));
    }
    if a.same_distribution(b) {
        let ground = CostMatrix::from_fn(0, 0, |_, _| 0.0);
        return Ok(LiftedSolution { value: 0.0, ground, plan: None });
    }
    let ground = ground_matrix(a, b)?;
    let (value, plan) = w1_discrete(&ground, &a.weights(), &b.weights())?;
    Ok(LiftedSolution { value, ground, plan: Some(plan) })
}

/// Average of `w1(a[k], b[k])`: the cost of the coupling that pairs the
/// empirical measures of the same sample point. It bounds the lifted
/// distance between the two uniform metas from above.
pub fn matched_l1(a: &[EmpiricalMeasure], b: &[EmpiricalMeasure]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::input("matched samples must be nonempty and of equal length"));
    }
    let d: Vec<f64> = a.par_iter().zip(b.par_iter()).map(|(x, y)| w1(x, y)).collect::<Result<Vec<f64>>>()?;
    Ok(d.iter().sum::<f64>() / a.len() as f64)
}
