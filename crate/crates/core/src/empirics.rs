//! Empirical measures of orbit segments, streaming accumulation and the
//! push-forward meta-measures of a reference sample.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase_space::{CellGrid, PhaseSpace, Point};
use crate::systems::{orbit, orbit_iter, BowenTrajectory, Family, OrbitBudget, SystemSpec};
use crate::transport::{EmpiricalMeasure, MetaMeasure};

fn check_horizon(spec: &SystemSpec, n: usize, budget: &OrbitBudget) -> Result<()> {
    if n == 0 {
        return Err(Error::input("empirical measures need n >= 1"));
    }
    if n > budget.iterations {
        return Err(Error::Config(format!(
            "horizon {n} exceeds the orbit budget of {} iterations",
            budget.iterations
        )));
    }
    spec.check_budget(&OrbitBudget::new(n, budget.precision_bits))
}

/// `(1/n) Σ_{i<n} δ_{f^i(x0)}`. For the heteroclinic surrogate `n` is a
/// time and the measure is the occupation measure of `[0, n]`.
pub fn empirical_measure(spec: &SystemSpec, x0: &Point, n: usize, budget: &OrbitBudget) -> Result<EmpiricalMeasure> {
    if let Family::BowenSurrogate { params, u0 } = &spec.family {
        spec.validate()?;
        spec.space.check(x0)?;
        if n == 0 {
            return Err(Error::input("empirical measures need n >= 1"));
        }
        let traj = BowenTrajectory::until_time(params, *u0, n as f64)?;
        return occupation_measure(&traj, n as f64);
    }
    check_horizon(spec, n, budget)?;
    let points = orbit(spec, x0, &OrbitBudget::new(n, budget.precision_bits))?;
    EmpiricalMeasure::from_points(spec.space, &points)
}

/// Two-atom measure on `{A = word 0, B = word 1}` from the time spent near
/// each saddle over `[0, t]`, connections split evenly.
pub fn occupation_measure(traj: &BowenTrajectory, t: f64) -> Result<EmpiricalMeasure> {
    let share_a = traj.mass_at_a(t);
    let space = PhaseSpace::BinaryShift { depth: 1 };
    let m = EmpiricalMeasure::from_masses(space, vec![(Point::Word(0), share_a), (Point::Word(1), 1.0 - share_a)])?;
    Ok(m.with_n_source(t as u64))
}

/// Running location counts of an orbit segment. Optionally every location
/// is assigned to a mesh cell; a cell seen with a single location keeps it,
/// otherwise it is represented by its centre.
#[derive(Clone, Debug)]
pub struct EmpiricalAccumulator {
    space: PhaseSpace,
    cells: Option<CellGrid>,
    counts: BTreeMap<(u64, u64), Slot>,
    n: u64,
}

#[derive(Clone, Debug)]
struct Slot {
    point: Point,
    count: u64,
    mixed: bool,
}

impl EmpiricalAccumulator {
    pub fn new(space: PhaseSpace) -> Result<Self> {
        space.validate()?;
        Ok(EmpiricalAccumulator { space, cells: None, counts: BTreeMap::new(), n: 0 })
    }

    /// Accumulate into the cells of a `mesh` grid instead of exact locations.
    pub fn with_mesh(space: PhaseSpace, mesh: f64) -> Result<Self> {
        let grid = space.cells(mesh)?;
        Ok(EmpiricalAccumulator { space, cells: Some(grid), counts: BTreeMap::new(), n: 0 })
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Add one orbit point.
    pub fn push(&mut self, p: Point) -> Result<()> {
        self.space.check(&p)?;
        let key = match &self.cells {
            Some(grid) => grid.cell_of(&p),
            None => p.key(),
        };
        self.counts
            .entry(key)
            .and_modify(|s| {
                s.count += 1;
                if s.point.key() != p.key() {
                    s.mixed = true;
                }
            })
            .or_insert(Slot { point: p, count: 1, mixed: false });
        self.n += 1;
        Ok(())
    }

    /// The measure `(1/n) Σ δ` of the points pushed so far.
    pub fn extract(&self) -> Result<EmpiricalMeasure> {
        if self.n == 0 {
            return Err(Error::input("no points accumulated yet"));
        }
        match &self.cells {
            None => {
                let counts = self.counts.values().map(|s| (s.point, s.count)).collect();
                Ok(EmpiricalMeasure::from_sorted_counts(self.space, counts, self.n))
            }
            Some(grid) => {
                let nf = self.n as f64;
                let atoms = self
                    .counts
                    .iter()
                    .map(|(cell, s)| {
                        let p = if s.mixed { grid.representative(*cell) } else { s.point };
                        (p, s.count as f64 / nf)
                    })
                    .collect();
                Ok(EmpiricalMeasure::from_masses(self.space, atoms)?.with_n_source(self.n))
            }
        }
    }
}

/// Functional form of [`EmpiricalAccumulator::push`].
pub fn extend(mut acc: EmpiricalAccumulator, next: Point) -> Result<EmpiricalAccumulator> {
    acc.push(next)?;
    Ok(acc)
}

/// Empirical measures at each (ascending) horizon of `schedule`, from one
/// streamed orbit. With `mesh`, atoms are accumulated into mesh cells.
pub fn schedule_measures(
    spec: &SystemSpec,
    x0: &Point,
    schedule: &[usize],
    budget: &OrbitBudget,
    mesh: Option<f64>,
) -> Result<Vec<EmpiricalMeasure>> {
    if schedule.is_empty() {
        return Ok(Vec::new());
    }
    if schedule.windows(2).any(|w| w[1] < w[0]) || schedule[0] == 0 {
        return Err(Error::input("schedule must be ascending and positive"));
    }
    let last = *schedule.last().unwrap();
    if let Family::BowenSurrogate { params, u0 } = &spec.family {
        spec.validate()?;
        spec.space.check(x0)?;
        let traj = BowenTrajectory::until_time(params, *u0, last as f64)?;
        return schedule.iter().map(|&t| occupation_measure(&traj, t as f64)).collect();
    }
    check_horizon(spec, last, budget)?;
    let mut acc = match mesh {
        Some(h) => EmpiricalAccumulator::with_mesh(spec.space, h)?,
        None => EmpiricalAccumulator::new(spec.space)?,
    };
    let mut out = Vec::with_capacity(schedule.len());
    let mut next = 0;
    for p in orbit_iter(spec, x0, &OrbitBudget::new(last, budget.precision_bits))? {
        acc.push(p)?;
        while next < schedule.len() && schedule[next] as u64 == acc.count() {
            out.push(acc.extract()?);
            next += 1;
        }
    }
    Ok(out)
}

/// `ê_n`: the uniform meta-measure of the empirical measures of the sample
/// points, computed in parallel.
pub fn meta_empirical(spec: &SystemSpec, sample: &[Point], n: usize, budget: &OrbitBudget) -> Result<MetaMeasure> {
    MetaMeasure::uniform(per_point_measures(spec, sample, n, budget, None)?)
}

/// Per-point empirical measures at horizon `n`, in sample order.
pub fn per_point_measures(
    spec: &SystemSpec,
    sample: &[Point],
    n: usize,
    budget: &OrbitBudget,
    mesh: Option<f64>,
) -> Result<Vec<EmpiricalMeasure>> {
    if sample.is_empty() {
        return Err(Error::input("the reference sample is empty"));
    }
    sample
        .par_iter()
        .map(|x| match mesh {
            None => empirical_measure(spec, x, n, budget),
            Some(_) => Ok(schedule_measures(spec, x, &[n], budget, mesh)?.remove(0)),
        })
        .collect()
}

/// Exact `W1(e_n, e_{n+1})` for `n = 1..=n_max` along the orbit of `x0`.
/// Since `e_n - e_{n+1} = (e_n - δ_{x_n}) / (n+1)` and W1 is a norm on signed
/// measures of mass zero, the gap equals `Σ_{i<n} d(x_i, x_n) / (n (n+1))`.
pub fn consecutive_gaps(spec: &SystemSpec, x0: &Point, n_max: usize, budget: &OrbitBudget) -> Result<Vec<(usize, f64)>> {
    check_horizon(spec, n_max + 1, budget)?;
    let points = orbit(spec, x0, &OrbitBudget::new(n_max + 1, budget.precision_bits))?;
    Ok(gaps_from_points(spec.space, &points))
}

/// Gap sequence of [`consecutive_gaps`] for an explicit point list.
pub fn gaps_from_points(space: PhaseSpace, points: &[Point]) -> Vec<(usize, f64)> {
    (1..points.len())
        .into_par_iter()
        .map(|n| {
            let xn = &points[n];
            let s: f64 = points[..n].iter().map(|p| space.distance_unchecked(p, xn)).sum();
            (n, s / (n as f64 * (n as f64 + 1.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::golden;
    use crate::transport::{w1, w1_circle};

    #[test]
    fn fixed_point_gives_dirac() {
        let spec = SystemSpec::logistic(2.0);
        let b = OrbitBudget::sufficient(&spec, 50);
        for n in [1, 7, 50] {
            let m = empirical_measure(&spec, &Point::Interval(0.5), n, &b).unwrap();
            assert_eq!(m.len(), 1);
            assert_eq!(m.atoms()[0].weight, 1.0);
        }
    }

    #[test]
    fn half_rotation_two_atoms() {
        let spec = SystemSpec::rotation(0.5);
        let m = empirical_measure(&spec, &Point::Circle(0.0), 2, &OrbitBudget::new(2, 64)).unwrap();
        assert_eq!(m.weights(), vec![0.5, 0.5]);
        assert_eq!(m.points(), vec![Point::Circle(0.0), Point::Circle(0.5)]);
    }

    #[test]
    fn streaming_equals_batch() {
        let spec = SystemSpec::rotation(0.25);
        let b = OrbitBudget::new(200, 64);
        let mut acc = EmpiricalAccumulator::new(spec.space).unwrap();
        for (i, p) in orbit(&spec, &Point::Circle(0.1), &b).unwrap().into_iter().enumerate() {
            acc = extend(acc, p).unwrap();
            let batch = empirical_measure(&spec, &Point::Circle(0.1), i + 1, &b).unwrap();
            assert_eq!(acc.extract().unwrap(), batch);
        }
    }

    #[test]
    fn repeated_locations_do_not_add_atoms() {
        let mut acc = EmpiricalAccumulator::new(PhaseSpace::UnitInterval).unwrap();
        acc.push(Point::Interval(0.3)).unwrap();
        let k = acc.extract().unwrap().len();
        acc.push(Point::Interval(0.3)).unwrap();
        assert_eq!(acc.extract().unwrap().len(), k);
    }

    #[test]
    fn gap_identity_matches_solver() {
        let spec = SystemSpec::rotation(golden());
        let b = OrbitBudget::new(40, 64);
        let x = Point::Circle(0.3);
        let gaps = consecutive_gaps(&spec, &x, 30, &b).unwrap();
        for &(n, g) in gaps.iter().step_by(7) {
            let a = empirical_measure(&spec, &x, n, &b).unwrap();
            let c = empirical_measure(&spec, &x, n + 1, &b).unwrap();
            assert!((w1_circle(&a, &c).unwrap() - g).abs() < 1e-12);
            assert!(g <= 0.5 / (n as f64 + 1.0) + 1e-12);
        }
    }

    #[test]
    fn bowen_occupation_measure_tracks_running_average() {
        let params = crate::systems::BowenParams::new((1.0, 2.0), (1.0, 2.0), 1.0, 0.0);
        let spec = SystemSpec::bowen(params.clone(), 0.1);
        let traj = BowenTrajectory::simulate(&params, 0.1, 10).unwrap();
        let rec = traj.passages[6];
        let t = rec.time.floor() as usize;
        let m = empirical_measure(&spec, &Point::Word(0), t, &OrbitBudget::new(1, 64)).unwrap();
        let mass_a = m.integrate(|p| if *p == Point::Word(0) { 1.0 } else { 0.0 });
        assert!((mass_a - traj.average_at(t as f64)).abs() < 1e-12);
    }

    #[test]
    fn mesh_accumulator_matches_coarsen_bound() {
        let spec = SystemSpec::rotation(golden());
        let b = OrbitBudget::new(5000, 64);
        let x = Point::Circle(0.0);
        let exact = empirical_measure(&spec, &x, 5000, &b).unwrap();
        let coarse = schedule_measures(&spec, &x, &[5000], &b, Some(1.0 / 128.0)).unwrap().remove(0);
        assert!(coarse.len() <= 128);
        assert!(w1(&exact, &coarse).unwrap() <= 1.0 / 256.0 + 1e-12);
    }
}
