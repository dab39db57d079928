//! Wasserstein-1 engines and the measure types they act on.

pub mod entropic;
pub mod lifted;
pub mod measure;
pub mod one_dim;
pub mod simplex;
pub mod tree;

use crate::error::{Error, Result};
use crate::phase_space::PhaseSpace;

pub use entropic::{w1_entropic, EntropicBracket};
pub use lifted::{ground_matrix, lifted_w1, lifted_w1_detailed, matched_l1, LiftedSolution, DEFAULT_ATOM_CAP};
pub use measure::{coarsen, Atom, EmpiricalMeasure, MetaMeasure};
pub use one_dim::{w1_circle, w1_interval};
pub use simplex::{w1_discrete, CostMatrix, TransportPlan};
pub use tree::w1_shift;

/// Largest support handled by the generic annulus solver.
pub const DISCRETE_ATOM_CAP: usize = 4096;

/// Ground-cost matrix between the supports of two measures.
pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<CostMatrix> {
    if mu.space() != nu.space() {
        return Err(Error::input(format!("measures live on {} and {}", mu.space(), nu.space())));
    }
    let space = mu.space();
    let (a, b) = (mu.atoms(), nu.atoms());
    Ok(CostMatrix::from_fn(a.len(), b.len(), |i, j| space.distance_unchecked(&a[i].point, &b[j].point)))
}

/// Exact W1 with the solver suited to the space: CDF formulas on the
/// interval and circle, the cylinder tree on the shift and the network
/// simplex on the annulus.
pub fn w1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.space() != nu.space() {
        return Err(Error::input(format!("measures live on {} and {}", mu.space(), nu.space())));
    }
    if mu.same_distribution(nu) {
        return Ok(0.0);
    }
    Ok(match mu.space() {
        PhaseSpace::UnitInterval => one_dim::interval_unchecked(mu, nu),
        PhaseSpace::Circle => one_dim::circle_unchecked(mu, nu),
        PhaseSpace::BinaryShift { depth } => tree::shift_unchecked(mu, nu, depth),
        PhaseSpace::Annulus => {
            if mu.len() > DISCRETE_ATOM_CAP || nu.len() > DISCRETE_ATOM_CAP {
                return Err(Error::Resource(format!(
                    "annulus W1 between {} and {} atoms exceeds the cap of {DISCRETE_ATOM_CAP}; coarsen first",
                    mu.len(),
                    nu.len()
                )));
            }
            w1_discrete(&cost_matrix(mu, nu)?, &mu.weights(), &nu.weights())?.0
        }
    })
}
