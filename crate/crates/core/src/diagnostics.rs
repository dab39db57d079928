//! Finite-horizon divergence estimators, oscillation scores, the
//! non-statistical flag, meta-level gap curves and power-law fits.
//!
//! Suprema over all `n, m >= N` are replaced by maxima over a schedule in
//! `[N, M]`; between adjacent schedule entries the per-step bound
//! `W1(e_n, e_{n+1}) <= diam / (n+1)` limits what the schedule can miss.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirics::{per_point_measures, schedule_measures};
use crate::error::{Error, Result};
use crate::phase_space::{PhaseSpace, Point};
use crate::systems::{OrbitBudget, SystemSpec};
use crate::transport::{lifted_w1, w1, EmpiricalMeasure, MetaMeasure};

pub const DEFAULT_RATIO: f64 = 1.2;
pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_SAMPLE_SIZE: usize = 200;

/// Reference sample drawn from the space's reference measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub seed: u64,
    pub points: Vec<Point>,
}

impl ReferenceSample {
    pub fn draw(space: PhaseSpace, seed: u64, size: usize) -> Result<Self> {
        Ok(ReferenceSample { seed, points: space.sample_reference(seed, size)? })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Smallest budget sufficient for every spec at `iterations`.
pub fn covering_budget(specs: &[&SystemSpec], iterations: usize) -> OrbitBudget {
    let bits = specs
        .iter()
        .map(|s| OrbitBudget::sufficient(s, iterations).precision_bits)
        .max()
        .unwrap_or(crate::systems::GUARD_BITS);
    OrbitBudget::new(iterations, bits)
}

fn check_range(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::input("N must be at least 1"));
    }
    if n > m {
        return Err(Error::input(format!("N = {n} exceeds M = {m}")));
    }
    Ok(())
}

/// `N, ceil(N r), ceil(N r^2), ...` up to and including `M`.
pub fn geometric_schedule(n: usize, m: usize, ratio: f64) -> Result<Vec<usize>> {
    check_range(n, m)?;
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::input(format!("schedule ratio must exceed 1, got {ratio}")));
    }
    let mut out = vec![n];
    let mut x = n as f64;
    loop {
        x *= ratio;
        let k = x.ceil() as usize;
        if k >= m {
            break;
        }
        if k > *out.last().unwrap() {
            out.push(k);
        }
    }
    if *out.last().unwrap() != m {
        out.push(m);
    }
    Ok(out)
}

fn check_schedule(schedule: &[usize], n: usize, m: usize) -> Result<()> {
    check_range(n, m)?;
    if schedule.first() != Some(&n) || schedule.last() != Some(&m) {
        return Err(Error::input(format!("schedule must start at N = {n} and end at M = {m}")));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("schedule must be strictly increasing"));
    }
    Ok(())
}

/// Upper bound on `Σ_{k=a}^{b-1} diam/(k+1)`: exact for short gaps and
/// `diam ln(b/a)` otherwise.
fn gap_sum(a: usize, b: usize, diameter: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if b - a <= 100_000 {
        (a..b).map(|k| diameter / (k as f64 + 1.0)).sum()
    } else {
        diameter * (b as f64 / a as f64).ln()
    }
}

/// What the sup over all of `[N, M]^2` can exceed the schedule maximum by:
/// each index lies within one gap sum of a schedule entry.
pub fn interpolation_bound(schedule: &[usize], diameter: f64) -> f64 {
    let worst = schedule.windows(2).map(|w| gap_sum(w[0], w[1], diameter)).fold(0.0, f64::max);
    2.0 * worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationPair {
    pub n: usize,
    pub m: usize,
    pub w1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub n_min: usize,
    pub n_max: usize,
    pub score: f64,
    pub pairs: Vec<OscillationPair>,
    pub error_bound: f64,
    pub threshold: f64,
    /// `score > threshold`.
    pub oscillating: bool,
}

/// `max W1(e_n(x0), e_m(x0))` over schedule pairs with `n < m`.
pub fn oscillation_score(
    spec: &SystemSpec,
    x0: &Point,
    n: usize,
    m: usize,
    schedule: &[usize],
    threshold: f64,
    budget: &OrbitBudget,
) -> Result<OscillationReport> {
    check_schedule(schedule, n, m)?;
    let measures = schedule_measures(spec, x0, schedule, budget, None)?;
    let table = pair_matrix(&measures, None)?;
    let k = schedule.len();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    let mut score = 0.0f64;
    for i in 0..k {
        for j in i + 1..k {
            let v = table[i * k + j];
            score = score.max(v);
            pairs.push(OscillationPair { n: schedule[i], m: schedule[j], w1: v });
        }
    }
    Ok(OscillationReport {
        n_min: n,
        n_max: m,
        score,
        pairs,
        error_bound: interpolation_bound(schedule, spec.space.diameter()),
        threshold,
        oscillating: score > threshold,
    })
}

/// `k x k` row-major matrix of `W1(a_i, b_j)`; `b = None` means `b = a`.
/// Runs of identical measures are evaluated once.
fn pair_matrix(a: &[EmpiricalMeasure], b: Option<&[EmpiricalMeasure]>) -> Result<Vec<f64>> {
    fn unique_ids(list: &[EmpiricalMeasure]) -> (Vec<usize>, Vec<usize>) {
        let mut ids = Vec::with_capacity(list.len());
        let mut reps = Vec::new();
        for (i, mu) in list.iter().enumerate() {
            if i > 0 && mu.same_distribution(&list[i - 1]) {
                ids.push(ids[i - 1]);
            } else {
                ids.push(reps.len());
                reps.push(i);
            }
        }
        (ids, reps)
    }
    let k = a.len();
    let (ida, repa) = unique_ids(a);
    let mut out = vec![0.0; k * k];
    match b {
        None => {
            let u = repa.len();
            let mut uniq = vec![0.0; u * u];
            for p in 0..u {
                for q in p + 1..u {
                    let v = w1(&a[repa[p]], &a[repa[q]])?;
                    uniq[p * u + q] = v;
                    uniq[q * u + p] = v;
                }
            }
            for i in 0..k {
                for j in 0..k {
                    out[i * k + j] = uniq[ida[i] * u + ida[j]];
                }
            }
        }
        Some(b) => {
            let (idb, repb) = unique_ids(b);
            let (u, v) = (repa.len(), repb.len());
            let mut uniq = vec![0.0; u * v];
            for p in 0..u {
                for q in 0..v {
                    uniq[p * v + q] = w1(&a[repa[p]], &b[repb[q]])?;
                }
            }
            for i in 0..k {
                for j in 0..k {
                    out[i * k + j] = uniq[ida[i] * v + idb[j]];
                }
            }
        }
    }
    Ok(out)
}

/// Per-point pair matrices `W1(e_{s_i}^h(x), e_{s_j}^g(x))` over a shared
/// schedule `s`, from which both divergence estimators are read off.
#[derive(Clone, Debug)]
pub struct PairTable {
    pub schedule: Vec<usize>,
    pub seed: u64,
    /// One `k x k` row-major matrix per sample point, in sample order.
    pub per_point: Vec<Vec<f64>>,
}

impl PairTable {
    pub fn compute(
        h: &SystemSpec,
        g: &SystemSpec,
        schedule: &[usize],
        sample: &ReferenceSample,
        budget: &OrbitBudget,
    ) -> Result<Self> {
        if h.space != g.space {
            return Err(Error::input(format!("systems live on {} and {}", h.space, g.space)));
        }
        if sample.is_empty() {
            return Err(Error::input("the reference sample is empty"));
        }
        if schedule.is_empty() {
            return Err(Error::input("empty schedule"));
        }
        let same = h == g;
        let per_point = sample
            .points
            .par_iter()
            .map(|x| {
                let a = schedule_measures(h, x, schedule, budget, None)?;
                if same {
                    pair_matrix(&a, None)
                } else {
                    let b = schedule_measures(g, x, schedule, budget, None)?;
                    pair_matrix(&a, Some(&b))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairTable { schedule: schedule.to_vec(), seed: sample.seed, per_point })
    }

    fn k(&self) -> usize {
        self.schedule.len()
    }

    fn start(&self, n: usize) -> Result<usize> {
        self.schedule
            .iter()
            .position(|&s| s == n)
            .ok_or_else(|| Error::input(format!("N = {n} is not in the schedule")))
    }

    /// Per-point `max_{i,j >= start}` of the pair matrix, for every start
    /// index; nonincreasing in the start index by construction.
    pub fn suffix_maxima(&self) -> Vec<Vec<f64>> {
        let k = self.k();
        self.per_point
            .iter()
            .map(|p| {
                let mut sm = vec![0.0f64; (k + 1) * (k + 1)];
                let w = k + 1;
                for i in (0..k).rev() {
                    for j in (0..k).rev() {
                        sm[i * w + j] = p[i * k + j].max(sm[(i + 1) * w + j]).max(sm[i * w + j + 1]);
                    }
                }
                (0..k).map(|s| sm[s * w + s]).collect()
            })
            .collect()
    }

    /// Per-point sup over schedule pairs at or beyond `n`.
    pub fn per_point_sup(&self, n: usize) -> Result<Vec<f64>> {
        let s = self.start(n)?;
        let k = self.k();
        Ok(self
            .per_point
            .iter()
            .map(|p| {
                let mut best = 0.0f64;
                for i in s..k {
                    for j in s..k {
                        best = best.max(p[i * k + j]);
                    }
                }
                best
            })
            .collect())
    }

    /// Average over the sample of the per-point sup.
    pub fn delta_e(&self, n: usize) -> Result<f64> {
        Ok(mean(&self.per_point_sup(n)?))
    }

    /// Sup over schedule pairs of the sample-averaged distance.
    pub fn delta_l1(&self, n: usize) -> Result<f64> {
        let s = self.start(n)?;
        let k = self.k();
        let mut best = 0.0f64;
        for i in s..k {
            for j in s..k {
                let avg = mean(&self.per_point.iter().map(|p| p[i * k + j]).collect::<Vec<_>>());
                best = best.max(avg);
            }
        }
        Ok(best)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    DeltaE,
    DeltaL1,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::DeltaE => "delta_e",
            DivergenceKind::DeltaL1 => "delta_l1",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub kind: DivergenceKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub value: f64,
}

fn estimate(
    kind: DivergenceKind,
    h: &SystemSpec,
    g: &SystemSpec,
    n: usize,
    m: usize,
    sample: &ReferenceSample,
    budget: &OrbitBudget,
) -> Result<DivergenceEstimate> {
    let schedule = geometric_schedule(n, m, DEFAULT_RATIO)?;
    let table = PairTable::compute(h, g, &schedule, sample, budget)?;
    let value = match kind {
        DivergenceKind::DeltaE => table.delta_e(n)?,
        DivergenceKind::DeltaL1 => table.delta_l1(n)?,
    };
    Ok(DivergenceEstimate { kind, n, m, sample_size: sample.len(), seed: sample.seed, value })
}

/// Sample average of the per-point sup of `W1(e_n^h(x), e_m^g(x))` over
/// schedule pairs in `[N, M]`.
pub fn delta_e_estimate(
    h: &SystemSpec,
    g: &SystemSpec,
    n: usize,
    m: usize,
    sample: &ReferenceSample,
    budget: &OrbitBudget,
) -> Result<DivergenceEstimate> {
    estimate(DivergenceKind::DeltaE, h, g, n, m, sample, budget)
}

/// Sup over schedule pairs in `[N, M]` of the sample average of
/// `W1(e_i^h(x), e_j^g(x))`.
pub fn delta_l1_estimate(
    h: &SystemSpec,
    g: &SystemSpec,
    n: usize,
    m: usize,
    sample: &ReferenceSample,
    budget: &OrbitBudget,
) -> Result<DivergenceEstimate> {
    estimate(DivergenceKind::DeltaL1, h, g, n, m, sample, budget)
}

/// Geometric schedule from `min(n_list)` to `m` with every entry of
/// `n_list` inserted.
pub fn union_schedule(n_list: &[usize], m: usize, ratio: f64) -> Result<Vec<usize>> {
    let first = *n_list.iter().min().ok_or_else(|| Error::input("N list is empty"))?;
    let mut s = geometric_schedule(first, m, ratio)?;
    for &n in n_list {
        check_range(n, m)?;
        s.push(n);
    }
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// The curve `N -> Δᵉ_N(h, g)` for `N` in `n_list`, all read from one
/// union schedule so that it is nonincreasing in `N`.
pub fn delta_e_curve(
    h: &SystemSpec,
    g: &SystemSpec,
    n_list: &[usize],
    m: usize,
    sample: &ReferenceSample,
    budget: &OrbitBudget,
) -> Result<Vec<DivergenceEstimate>> {
    let schedule = union_schedule(n_list, m, DEFAULT_RATIO)?;
    let table = PairTable::compute(h, g, &schedule, sample, budget)?;
    let maxima = table.suffix_maxima();
    n_list
        .iter()
        .map(|&n| {
            let s = table.start(n)?;
            let value = mean(&maxima.iter().map(|row| row[s]).collect::<Vec<_>>());
            Ok(DivergenceEstimate {
                kind: DivergenceKind::DeltaE,
                n,
                m,
                sample_size: sample.len(),
                seed: sample.seed,
                value,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "NON-STATISTICAL-AT-HORIZON")]
    NonStatisticalAtHorizon,
    #[serde(rename = "NOT-FLAGGED")]
    NotFlagged,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NonStatisticalAtHorizon => "NON-STATISTICAL-AT-HORIZON",
            Verdict::NotFlagged => "NOT-FLAGGED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonStatisticalReport {
    pub verdict: Verdict,
    pub threshold: f64,
    pub curve: Vec<DivergenceEstimate>,
}

/// Flags the system when `Δᵉ_N(f, f)` exceeds `threshold` for every `N`.
pub fn nonstatistical_flag(
    spec: &SystemSpec,
    sample: &ReferenceSample,
    n_list: &[usize],
    m: usize,
    threshold: f64,
    budget: &OrbitBudget,
) -> Result<NonStatisticalReport> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("N list must be increasing"));
    }
    let curve = delta_e_curve(spec, spec, n_list, m, sample, budget)?;
    let flagged = curve.iter().all(|e| e.value > threshold);
    Ok(NonStatisticalReport {
        verdict: if flagged { Verdict::NonStatisticalAtHorizon } else { Verdict::NotFlagged },
        threshold,
        curve,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaGap {
    pub n: usize,
    pub gap: f64,
    /// `diam / (n+1)`.
    pub bound: f64,
    /// `bound + mesh - gap`; negative means a violation.
    pub slack: f64,
}

/// Lifted distance between `ê_n` and `ê_{n+1}` on a shared sample. With a
/// mesh, per-point measures are coarsened first and the allowance grows
/// by the mesh.
pub fn meta_gap_curve(
    spec: &SystemSpec,
    sample: &ReferenceSample,
    n_list: &[usize],
    mesh: Option<f64>,
    budget: &OrbitBudget,
) -> Result<Vec<MetaGap>> {
    let diameter = spec.space.diameter();
    let allowance = mesh.unwrap_or(0.0);
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::input("n must be positive"));
            }
            let pairs = sample
                .points
                .par_iter()
                .map(|x| schedule_measures(spec, x, &[n, n + 1], budget, mesh))
                .collect::<Result<Vec<_>>>()?;
            let (a, b): (Vec<_>, Vec<_>) = pairs
                .into_iter()
                .map(|mut v| {
                    let second = v.pop().unwrap();
                    (v.pop().unwrap(), second)
                })
                .unzip();
            let gap = lifted_w1(&MetaMeasure::uniform(a)?, &MetaMeasure::uniform(b)?)?;
            let bound = diameter / (n as f64 + 1.0);
            Ok(MetaGap { n, gap, bound, slack: bound + allowance - gap })
        })
        .collect()
}

/// Midpoint grid of `resolution` atoms approximating normalized Lebesgue
/// measure on the arc `[x, x + s]`; `s = 0` gives `δ_x`.
pub fn arc_uniform(x: f64, s: f64, resolution: usize) -> Result<EmpiricalMeasure> {
    if !(0.0..=1.0).contains(&s) || resolution == 0 {
        return Err(Error::input("arc length must lie in [0,1] and the resolution be positive"));
    }
    let space = PhaseSpace::Circle;
    if s == 0.0 {
        return EmpiricalMeasure::dirac(space, space.canonicalize(Point::Circle(x))?);
    }
    let pts = (0..resolution)
        .map(|i| space.canonicalize(Point::Circle(x + s * (i as f64 + 0.5) / resolution as f64)))
        .collect::<Result<Vec<_>>>()?;
    EmpiricalMeasure::from_points(space, &pts)
}

/// Sample average of `δ_{Leb[x, x+s]}` over the circle points of `sample`.
pub fn arc_target(sample: &ReferenceSample, s: f64, resolution: usize) -> Result<MetaMeasure> {
    let atoms = sample
        .points
        .iter()
        .map(|p| match *p {
            Point::Circle(x) => arc_uniform(x, s, resolution),
            _ => Err(Error::input("arc targets need circle points")),
        })
        .collect::<Result<Vec<_>>>()?;
    MetaMeasure::uniform(atoms)
}

/// Uniform midpoint grid on the interval or the circle.
pub fn uniform_grid(space: PhaseSpace, resolution: usize) -> Result<EmpiricalMeasure> {
    if resolution == 0 {
        return Err(Error::input("resolution must be positive"));
    }
    let pts: Vec<Point> = (0..resolution)
        .map(|i| (i as f64 + 0.5) / resolution as f64)
        .map(|t| match space {
            PhaseSpace::UnitInterval => Ok(Point::Interval(t)),
            PhaseSpace::Circle => Ok(Point::Circle(t)),
            _ => Err(Error::Unsupported(format!("no uniform grid on {space}"))),
        })
        .collect::<Result<_>>()?;
    EmpiricalMeasure::from_points(space, &pts)
}

/// `lifted_w1(ê_{n_k}(f_k), target)` for each member of the family.
pub fn bifurcation_probe(
    family: &[SystemSpec],
    n_of_k: &[usize],
    target: &MetaMeasure,
    sample: &ReferenceSample,
    budget: &OrbitBudget,
) -> Result<Vec<f64>> {
    if family.len() != n_of_k.len() {
        return Err(Error::input(format!(
            "{} systems but {} horizons",
            family.len(),
            n_of_k.len()
        )));
    }
    family
        .iter()
        .zip(n_of_k)
        .map(|(spec, &n)| {
            let measures = per_point_measures(spec, &sample.points, n, budget, None)?;
            lifted_w1(&MetaMeasure::uniform(measures)?, target)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkRow {
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub delta_e: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

/// Linear-interpolation quantile of a sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// `Δᵉ_N(f_λ, f_λ)` and quantiles of the per-point oscillation for each
/// logistic parameter on the grid.
pub fn hk_parameter_scan(lambdas: &[f64], n: usize, m: usize, sample: &ReferenceSample) -> Result<Vec<HkRow>> {
    let schedule = geometric_schedule(n, m, DEFAULT_RATIO)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let spec = SystemSpec::new(
                crate::systems::Family::Logistic { lambda },
                PhaseSpace::UnitInterval,
            )?;
            let budget = OrbitBudget::sufficient(&spec, m);
            let table = PairTable::compute(&spec, &spec, &schedule, sample, &budget)?;
            let sups = table.per_point_sup(n)?;
            Ok(HkRow {
                lambda,
                n,
                m,
                delta_e: mean(&sups),
                q10: quantile(&sups, 0.1),
                q50: quantile(&sups, 0.5),
                q90: quantile(&sups, 0.9),
            })
        })
        .collect()
}

/// Least-squares fit of `value = C n^exponent` in log-log coordinates.
pub fn decay_fit(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < 3 {
        return Err(Error::input("a decay fit needs at least 3 points"));
    }
    if let Some(&(n, v)) = series.iter().find(|&&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(Error::input(format!("decay fit needs positive entries, got ({n}, {v})")));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("decay fit needs at least two distinct n".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Ok(((my - exponent * mx).exp(), exponent))
}
