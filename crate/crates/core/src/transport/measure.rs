//! Finitely supported probability measures and measures of measures.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{PhaseSpace, Point};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// One atom of a measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// Probability measure with finitely many atoms, sorted by location and with
/// coincident locations merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct EmpiricalMeasure {
    space: PhaseSpace,
    atoms: Vec<Atom>,
    n_source: u64,
}

#[derive(Deserialize)]
struct RawMeasure {
    space: PhaseSpace,
    atoms: Vec<Atom>,
    #[serde(default)]
    n_source: u64,
}

impl TryFrom<RawMeasure> for EmpiricalMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        let mut m = EmpiricalMeasure::from_atoms(raw.space, raw.atoms.into_iter().map(|a| (a.point, a.weight)).collect())?;
        m.n_source = raw.n_source;
        Ok(m)
    }
}

impl EmpiricalMeasure {
    /// Build from weighted points. Weights must be positive and sum to one.
    pub fn from_atoms(space: PhaseSpace, atoms: Vec<(Point, f64)>) -> Result<Self> {
        space.validate()?;
        if atoms.is_empty() {
            return Err(Error::input("a measure needs at least one atom"));
        }
        for (p, w) in &atoms {
            space.check(p)?;
            if !(*w > 0.0 && *w <= 1.0 + MASS_TOLERANCE) {
                return Err(Error::input(format!("atom weight {w} outside (0,1]")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE * atoms.len().max(1) as f64 {
            return Err(Error::input(format!("weights sum to {total}, not 1")));
        }
        Ok(Self::merge(space, atoms, 0))
    }

    /// Normalize nonnegative masses to a probability measure; zero masses are dropped.
    pub fn from_masses(space: PhaseSpace, masses: Vec<(Point, f64)>) -> Result<Self> {
        space.validate()?;
        let total: f64 = masses.iter().map(|a| a.1).sum();
        if masses.iter().any(|a| !(a.1 >= 0.0 && a.1.is_finite())) || total <= 0.0 || total.is_nan() {
            return Err(Error::input("masses must be nonnegative with positive total"));
        }
        for (p, _) in &masses {
            space.check(p)?;
        }
        let atoms = masses.into_iter().filter(|a| a.1 > 0.0).map(|(p, w)| (p, w / total)).collect();
        Ok(Self::merge(space, atoms, 0))
    }

    /// Uniform weights `1/n` over the given points (the empirical measure of an
    /// orbit segment). Weights are `count / n` computed once per location.
    pub fn from_points(space: PhaseSpace, points: &[Point]) -> Result<Self> {
        space.validate()?;
        if points.is_empty() {
            return Err(Error::input("a measure needs at least one point"));
        }
        for p in points {
            space.check(p)?;
        }
        let mut sorted: Vec<Point> = points.to_vec();
        sorted.sort_by_key(|p| p.key());
        let mut counts: Vec<(Point, u64)> = Vec::new();
        for p in sorted {
            match counts.last_mut() {
                Some((q, c)) if q.key() == p.key() => *c += 1,
                _ => counts.push((p, 1)),
            }
        }
        Ok(Self::from_sorted_counts(space, counts, points.len() as u64))
    }

    /// Atoms from location counts already sorted by key and distinct.
    pub(crate) fn from_sorted_counts(space: PhaseSpace, counts: Vec<(Point, u64)>, n: u64) -> Self {
        let nf = n as f64;
        let atoms = counts.into_iter().map(|(point, c)| Atom { point, weight: c as f64 / nf }).collect();
        EmpiricalMeasure { space, atoms, n_source: n }
    }

    pub fn dirac(space: PhaseSpace, p: Point) -> Result<Self> {
        space.validate()?;
        space.check(&p)?;
        Ok(EmpiricalMeasure { space, atoms: vec![Atom { point: p, weight: 1.0 }], n_source: 0 })
    }

    fn merge(space: PhaseSpace, mut atoms: Vec<(Point, f64)>, n_source: u64) -> Self {
        atoms.sort_by_key(|a| a.0.key());
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            match out.last_mut() {
                Some(a) if a.point.key() == p.key() => a.weight += w,
                _ => out.push(Atom { point: p, weight: w }),
            }
        }
        EmpiricalMeasure { space, atoms: out, n_source }
    }

    pub fn with_n_source(mut self, n: u64) -> Self {
        self.n_source = n;
        self
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn n_source(&self) -> u64 {
        self.n_source
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn points(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `∫ f dmu`.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.point)).sum()
    }

    /// Same atoms and weights (ignores `n_source`).
    pub fn same_distribution(&self, other: &EmpiricalMeasure) -> bool {
        self.space == other.space && self.atoms == other.atoms
    }

    /// Apply `f` to every location, re-merging coincident images.
    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> Result<EmpiricalMeasure> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let p = self.space.canonicalize(f(&a.point))?;
            atoms.push((p, a.weight));
        }
        Ok(Self::merge(self.space, atoms, self.n_source))
    }

    fn fingerprint(&self) -> Vec<(u64, u64, u64)> {
        self.atoms.iter().map(|a| {
            let (k0, k1) = a.point.key();
            (k0, k1, a.weight.to_bits())
        }).collect()
    }
}

/// Snap atoms to the cells of a `mesh` grid. A cell holding one location
/// keeps it; a cell holding several is replaced by its centre with the summed
/// weight. Every atom moves by at most `mesh / 2`, so the W1 distance to the
/// input is at most `mesh / 2`.
pub fn coarsen(mu: &EmpiricalMeasure, mesh: f64) -> Result<EmpiricalMeasure> {
    let grid = mu.space.cells(mesh)?;
    let mut keyed: Vec<((u64, u64), Atom)> = mu.atoms.iter().map(|a| (grid.cell_of(&a.point), *a)).collect();
    keyed.sort_by_key(|e| e.0);
    let mut out: Vec<(Point, f64)> = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let cell = keyed[i].0;
        let mut j = i;
        let mut mass = 0.0;
        while j < keyed.len() && keyed[j].0 == cell {
            mass += keyed[j].1.weight;
            j += 1;
        }
        if j - i == 1 {
            out.push((keyed[i].1.point, keyed[i].1.weight));
        } else {
            out.push((grid.representative(cell), mass));
        }
        i = j;
    }
    Ok(EmpiricalMeasure::merge(mu.space, out, mu.n_source))
}

/// Probability measure whose atoms are empirical measures on one space.
/// Identical atom measures are merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaMeasure {
    space: PhaseSpace,
    atoms: Vec<(EmpiricalMeasure, f64)>,
}

impl MetaMeasure {
    /// Uniform weights over `measures` (the push-forward of a sample).
    pub fn uniform(measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        let n = measures.len();
        if n == 0 {
            return Err(Error::input("a meta-measure needs at least one atom"));
        }
        let w = 1.0 / n as f64;
        Self::assemble(measures.into_iter().map(|m| (m, w)).collect(), n)
    }

    pub fn weighted(atoms: Vec<(EmpiricalMeasure, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("a meta-measure needs at least one atom"));
        }
        for (_, w) in &atoms {
            if !(*w > 0.0 && *w <= 1.0 + MASS_TOLERANCE) {
                return Err(Error::input(format!("meta weight {w} outside (0,1]")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE * atoms.len() as f64 {
            return Err(Error::input(format!("meta weights sum to {total}, not 1")));
        }
        let n = atoms.len();
        Self::assemble(atoms, n)
    }

    pub fn dirac(mu: EmpiricalMeasure) -> Self {
        MetaMeasure { space: mu.space, atoms: vec![(mu, 1.0)] }
    }

    fn assemble(atoms: Vec<(EmpiricalMeasure, f64)>, n: usize) -> Result<Self> {
        let space = atoms[0].0.space;
        if atoms.iter().any(|a| a.0.space != space) {
            return Err(Error::input("all atoms of a meta-measure must share one space"));
        }
        // Merge identical measures, keeping first-occurrence order. Counting
        // occurrences keeps uniform weights exact.
        let mut index: HashMap<Vec<(u64, u64, u64)>, usize> = HashMap::new();
        let mut merged: Vec<(EmpiricalMeasure, f64, usize)> = Vec::new();
        let uniform = atoms.iter().all(|a| a.1 == atoms[0].1);
        for (m, w) in atoms {
            let key = m.fingerprint();
            match index.get(&key) {
                Some(&i) => {
                    merged[i].1 += w;
                    merged[i].2 += 1;
                }
                None => {
                    index.insert(key, merged.len());
                    merged.push((m, w, 1));
                }
            }
        }
        let nf = n as f64;
        let atoms = merged
            .into_iter()
            .map(|(m, w, c)| (m, if uniform { c as f64 / nf } else { w }))
            .collect();
        Ok(MetaMeasure { space, atoms })
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn atoms(&self) -> &[(EmpiricalMeasure, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.1).collect()
    }

    /// Replace every atom measure by its coarsening.
    pub fn coarsen(&self, mesh: f64) -> Result<MetaMeasure> {
        let atoms = self
            .atoms
            .iter()
            .map(|(m, w)| Ok((coarsen(m, mesh)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        let n = atoms.len();
        Self::assemble(atoms, n)
    }

    /// Identical atom lists and weights.
    pub fn same_distribution(&self, other: &MetaMeasure) -> bool {
        self.space == other.space
            && self.atoms.len() == other.atoms.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(a, b)| a.1 == b.1 && a.0.same_distribution(&b.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_points_merge() {
        let pts = [Point::Interval(0.3), Point::Interval(0.1), Point::Interval(0.3), Point::Interval(0.3)];
        let m = EmpiricalMeasure::from_points(PhaseSpace::UnitInterval, &pts).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms()[0], Atom { point: Point::Interval(0.1), weight: 0.25 });
        assert_eq!(m.atoms()[1].weight, 0.75);
        assert_eq!(m.n_source(), 4);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let bad = EmpiricalMeasure::from_atoms(PhaseSpace::UnitInterval, vec![(Point::Interval(0.1), 0.5)]);
        assert!(bad.is_err());
    }

    #[test]
    fn coarsen_keeps_isolated_atoms() {
        let pts: Vec<Point> = (0..10).map(|i| Point::Interval(i as f64 / 10.0 + 0.013)).collect();
        let m = EmpiricalMeasure::from_points(PhaseSpace::UnitInterval, &pts).unwrap();
        assert_eq!(coarsen(&m, 0.05).unwrap(), m);
    }

    #[test]
    fn coarsen_respects_pigeonhole() {
        let pts: Vec<Point> = (0..10_000).map(|i| Point::Circle(i as f64 / 10_000.0)).collect();
        let m = EmpiricalMeasure::from_points(PhaseSpace::Circle, &pts).unwrap();
        let c = coarsen(&m, 1.0 / 256.0).unwrap();
        assert!(c.len() <= 256);
        assert!((c.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn meta_merges_identical_atoms() {
        let a = EmpiricalMeasure::dirac(PhaseSpace::Circle, Point::Circle(0.2)).unwrap();
        let b = EmpiricalMeasure::dirac(PhaseSpace::Circle, Point::Circle(0.7)).unwrap();
        let meta = MetaMeasure::uniform(vec![a.clone(), b, a]).unwrap();
        assert_eq!(meta.len(), 2);
        assert_eq!(meta.weights(), vec![2.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn json_roundtrip_validates() {
        let m = EmpiricalMeasure::from_points(PhaseSpace::Circle, &[Point::Circle(0.25), Point::Circle(0.5)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: EmpiricalMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let broken = r#"{"space":{"kind":"circle"},"atoms":[{"point":{"circle":0.25},"weight":0.7}],"n_source":0}"#;
        assert!(serde_json::from_str::<EmpiricalMeasure>(broken).is_err());
    }
}
