//! Numerical laboratory for statistical (in)stability of dynamical systems:
//! orbits, empirical measures, Wasserstein distances between measures and
//! between measures of measures, and finite-horizon divergence estimators.

pub mod diagnostics;
pub mod empirics;
pub mod error;
pub mod io;
pub mod oracles;
pub mod phase_space;
pub mod systems;
pub mod transport;

pub use diagnostics::{
    delta_e_curve, delta_e_estimate, delta_l1_estimate, geometric_schedule, meta_gap_curve, nonstatistical_flag,
    oscillation_score, DivergenceEstimate, DivergenceKind, OscillationReport, ReferenceSample, Verdict,
};
pub use empirics::{empirical_measure, extend, meta_empirical, EmpiricalAccumulator};
pub use error::{Error, Result};
pub use phase_space::{PhaseSpace, Point};
pub use systems::{orbit, step, DiffeoSpec, Family, OrbitBudget, SystemSpec};
pub use transport::{lifted_w1, w1, w1_discrete, EmpiricalMeasure, MetaMeasure, TransportPlan};
