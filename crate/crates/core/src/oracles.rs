//! Brute-force and closed-form reference values used to calibrate and test
//! the solvers. Each is written independently of the production algorithm
//! it checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{PhaseSpace, Point};
use crate::systems::{golden, BowenParams, OrbitBudget, SystemSpec};
use crate::transport::{w1_circle, CostMatrix, EmpiricalMeasure};

/// `sin^2(pi/7)` to 160 significant digits; its logistic-4 orbit has the
/// closed form `sin^2(pi (2^k mod 7) / 7)`.
pub const SIN2_PI_OVER_7: &str = "0.1882550990706332347374975579978800946838626345517989473172252804515731737717563577120287463367073141664709538954127284954321353723067136195828010577181497571485";

/// Closed form of the `k`-th logistic-4 iterate of `sin^2(pi/7)`.
pub fn logistic_conjugate_iterate(k: u32) -> f64 {
    let mut r = 1u64;
    for _ in 0..k {
        r = (2 * r) % 7;
    }
    (std::f64::consts::PI * r as f64 / 7.0).sin().powi(2)
}

/// Exact W1 by enumerating every basic feasible solution of the transport
/// LP (spanning trees of the bipartite support graph). Sizes up to 4 x 4.
pub fn lp_enumeration(cost: &CostMatrix, mu: &[f64], nu: &[f64]) -> Result<f64> {
    let (m, n) = (cost.rows(), cost.cols());
    if m != mu.len() || n != nu.len() {
        return Err(Error::input("marginal lengths do not match the cost matrix"));
    }
    if m == 0 || n == 0 || m > 4 || n > 4 {
        return Err(Error::Resource(format!("enumeration is limited to 4 x 4, got {m} x {n}")));
    }
    let cells = m * n;
    let k = m + n - 1;
    let mut pick: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    loop {
        if let Some(v) = tree_solution(cost, mu, nu, &pick) {
            best = best.min(v);
        }
        // next combination of k cells in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return if best.is_finite() {
                    Ok(best)
                } else {
                    Err(Error::input("no feasible basis; marginals must have equal mass"))
                };
            }
            i -= 1;
            if pick[i] < cells - k + i {
                break;
            }
        }
        pick[i] += 1;
        for t in i + 1..k {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

/// Flows on a candidate basis by leaf elimination; `None` when the cells
/// contain a cycle or the flows are infeasible.
fn tree_solution(cost: &CostMatrix, mu: &[f64], nu: &[f64], pick: &[usize]) -> Option<f64> {
    let n = cost.cols();
    let mut supply = mu.to_vec();
    let mut demand = nu.to_vec();
    let mut done = vec![false; pick.len()];
    let mut total = 0.0;
    for _ in 0..pick.len() {
        let mut progressed = false;
        for (e, &cell) in pick.iter().enumerate() {
            if done[e] {
                continue;
            }
            let (i, j) = (cell / n, cell % n);
            let row_open = pick.iter().enumerate().filter(|&(f, &c)| !done[f] && c / n == i).count();
            let col_open = pick.iter().enumerate().filter(|&(f, &c)| !done[f] && c % n == j).count();
            let flow = if row_open == 1 {
                supply[i]
            } else if col_open == 1 {
                demand[j]
            } else {
                continue;
            };
            if flow < -1e-12 {
                return None;
            }
            supply[i] -= flow;
            demand[j] -= flow;
            total += flow * cost.get(i, j);
            done[e] = true;
            progressed = true;
            break;
        }
        if !progressed {
            return None;
        }
    }
    let residual = supply.iter().chain(&demand).map(|r| r.abs()).fold(0.0, f64::max);
    (residual <= 1e-12).then_some(total)
}

/// W1 on `[0,1]` as `∫_0^1 |F^{-1}(t) - G^{-1}(t)| dt` over merged
/// quantile breakpoints.
pub fn quantile_w1(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> f64 {
    let sort = |v: &[(f64, f64)]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sort(mu), sort(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let step = ra.min(rb);
        total += step * (a[i].0 - b[j].0).abs();
        ra -= step;
        rb -= step;
        if ra <= 0.0 {
            i += 1;
            ra = a.get(i).map_or(0.0, |t| t.1);
        }
        if rb <= 0.0 {
            j += 1;
            rb = b.get(j).map_or(0.0, |t| t.1);
        }
    }
    total
}

/// Circle W1 between a measure and normalized Lebesgue measure:
/// `min_t ∫ |F(x) - x - t| dx`, with the minimizing shift found as the
/// Lebesgue median of `F(x) - x` and the integral evaluated piecewise.
pub fn circle_to_lebesgue(mu: &EmpiricalMeasure) -> Result<f64> {
    if mu.space() != PhaseSpace::Circle {
        return Err(Error::input("circle_to_lebesgue needs a circle measure"));
    }
    // pieces (a, b, level of F on [a, b))
    let mut pieces = Vec::with_capacity(mu.len() + 1);
    let mut start = 0.0;
    let mut level = 0.0;
    for atom in mu.atoms() {
        let Point::Circle(x) = atom.point else { unreachable!() };
        pieces.push((start, x, level));
        level += atom.weight;
        start = x;
    }
    pieces.push((start, 1.0, level));
    let below = |t: f64| -> f64 {
        pieces.iter().map(|&(a, b, c)| b - (c - t).clamp(a, b)).sum()
    };
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(pieces
        .iter()
        .map(|&(a, b, c)| {
            let (u, v) = (c - a - t, c - b - t);
            if v >= 0.0 {
                0.5 * (u * u - v * v)
            } else if u <= 0.0 {
                0.5 * (v * v - u * u)
            } else {
                0.5 * (u * u + v * v)
            }
        })
        .sum())
}

/// Circle W1 by solving the discrete LP on the arc-distance cost matrix.
pub fn circle_w1_lp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let c = crate::transport::cost_matrix(mu, nu)?;
    Ok(crate::transport::w1_discrete(&c, &mu.weights(), &nu.weights())?.0)
}

/// CDF of the arcsine law, the invariant density of logistic 4.
pub fn arcsine_cdf(x: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * x.clamp(0.0, 1.0).sqrt().asin()
}

/// Quantile-midpoint grid of the arcsine law with `resolution` atoms.
pub fn arcsine_grid(resolution: usize) -> Result<EmpiricalMeasure> {
    if resolution == 0 {
        return Err(Error::input("resolution must be positive"));
    }
    let pts: Vec<Point> = (0..resolution)
        .map(|i| {
            let u = (i as f64 + 0.5) / resolution as f64;
            Point::Interval((std::f64::consts::FRAC_PI_2 * u).sin().powi(2))
        })
        .collect();
    EmpiricalMeasure::from_points(PhaseSpace::UnitInterval, &pts)
}

/// Exact count of symbol 1 in the first `n` symbols of the block sequence:
/// even blocks are zeros, odd blocks alternate starting with 0.
pub fn block_ones(blocks: &[u64], n: u64) -> u64 {
    let mut left = n;
    let mut ones = 0;
    for (b, &len) in blocks.iter().enumerate() {
        let take = len.min(left);
        if b % 2 == 1 {
            ones += take / 2;
        }
        left -= take;
        if left == 0 {
            break;
        }
    }
    ones
}

/// Frequency of symbol 1 at the end of each block.
pub fn block_end_frequencies(blocks: &[u64]) -> Vec<(u64, f64)> {
    let mut end = 0;
    blocks
        .iter()
        .map(|&len| {
            end += len;
            (end, block_ones(blocks, end) as f64 / end as f64)
        })
        .collect()
}

/// Time-average limits of the heteroclinic cycle written directly in the
/// eigenvalues: returns `(limsup, liminf)` of the average of `g`.
pub fn gaunersdorfer_limits(alpha: (f64, f64), beta: (f64, f64), g_a: f64, g_b: f64) -> (f64, f64) {
    let (a_plus, a_minus) = alpha;
    let (b_plus, b_minus) = beta;
    let lambda = a_minus / b_plus;
    let sigma = b_minus / a_plus;
    let sup = (sigma * g_a + g_b) / (1.0 + sigma);
    let inf = (lambda * g_b + g_a) / (1.0 + lambda);
    (sup, inf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub label: String,
    pub value: f64,
}

fn value(label: impl Into<String>, value: f64) -> OracleValue {
    OracleValue { label: label.into(), value }
}

/// Names accepted by [`run_oracle`].
pub const ORACLE_NAMES: &[&str] = &[
    "gaunersdorfer",
    "block_frequencies",
    "identity_vs_lebesgue",
    "golden_discrepancy",
    "logistic_arcsine",
    "logistic_conjugacy",
    "arc_probe",
    "lp_enumeration",
];

/// Evaluate a registered oracle and return its labelled values.
pub fn run_oracle(name: &str) -> Result<Vec<OracleValue>> {
    match name {
        "gaunersdorfer" => {
            let (sup, inf) = gaunersdorfer_limits((1.0, 2.0), (1.0, 2.0), 1.0, 0.0);
            let p = BowenParams::new((1.0, 2.0), (1.0, 2.0), 1.0, 0.0);
            Ok(vec![
                value("limsup", sup),
                value("liminf", inf),
                value("lambda", p.lambda()),
                value("sigma", p.sigma()),
            ])
        }
        "block_frequencies" => {
            let blocks: Vec<u64> = (0..=6).map(|i| 10u64.pow(i)).collect();
            Ok(block_end_frequencies(&blocks)
                .into_iter()
                .map(|(end, f)| value(format!("frequency_at_{end}"), f))
                .collect())
        }
        "identity_vs_lebesgue" => {
            let sample = PhaseSpace::Circle.sample_reference(1, 200)?;
            let mut total = 0.0;
            for p in &sample {
                total += circle_to_lebesgue(&EmpiricalMeasure::dirac(PhaseSpace::Circle, *p)?)?;
            }
            Ok(vec![value("mean_w1_dirac_to_lebesgue", total / sample.len() as f64)])
        }
        "golden_discrepancy" => {
            let spec = SystemSpec::rotation(golden());
            [100usize, 1000, 10_000, 100_000]
                .iter()
                .map(|&n| {
                    let mu = crate::empirics::empirical_measure(&spec, &Point::Circle(0.0), n, &OrbitBudget::new(n, 64))?;
                    Ok(value(format!("n_times_w1_at_{n}"), n as f64 * circle_to_lebesgue(&mu)?))
                })
                .collect()
        }
        "logistic_arcsine" => {
            let spec = SystemSpec::logistic(4.0);
            let n = 10_000;
            let mu = crate::empirics::empirical_measure(&spec, &Point::Interval(0.3), n, &OrbitBudget::sufficient(&spec, n))?;
            let grid = arcsine_grid(4096)?;
            Ok(vec![value("w1_to_arcsine_at_10000", crate::transport::w1_interval(&mu, &grid)?)])
        }
        "logistic_conjugacy" => Ok((0..8).map(|k| value(format!("x_{k}"), logistic_conjugate_iterate(k))).collect()),
        "arc_probe" => {
            let k = 1000usize;
            let spec = SystemSpec::rotation(1.0 / k as f64);
            let sample = PhaseSpace::Circle.sample_reference(1, 20)?;
            let mut worst = 0.0f64;
            for p in &sample {
                let Point::Circle(x) = *p else { unreachable!() };
                let mu = crate::empirics::empirical_measure(&spec, p, k / 2, &OrbitBudget::new(k, 64))?;
                let arc = crate::diagnostics::arc_uniform(x, 0.5, 4096)?;
                worst = worst.max(w1_circle(&mu, &arc)?);
            }
            Ok(vec![value("max_w1_to_half_arc_k1000", worst)])
        }
        "lp_enumeration" => {
            let c = CostMatrix::from_fn(3, 3, |i, j| ((i + 2 * j) % 3) as f64 + 0.5 * (i as f64 - j as f64).abs());
            let v = lp_enumeration(&c, &[0.5, 0.25, 0.25], &[0.25, 0.25, 0.5])?;
            Ok(vec![value("w1_3x3_instance", v)])
        }
        _ => Err(Error::input(format!("unknown oracle {name:?}; known: {}", ORACLE_NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_small_cases() {
        let c = CostMatrix::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 1.0 });
        assert_eq!(lp_enumeration(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((lp_enumeration(&c, &[1.0, 0.0], &[0.25, 0.75]).unwrap() - 0.75).abs() < 1e-15);
        let big = CostMatrix::from_fn(5, 1, |_, _| 0.0);
        assert!(matches!(lp_enumeration(&big, &[0.2; 5], &[1.0]), Err(Error::Resource(_))));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile_w1(&[(0.0, 1.0)], &[(1.0, 1.0)]), 1.0);
        assert!((quantile_w1(&[(0.0, 0.5), (1.0, 0.5)], &[(0.5, 1.0)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_distance_of_a_dirac_is_a_quarter() {
        for x in [0.0, 0.3, 0.999] {
            let d = EmpiricalMeasure::dirac(PhaseSpace::Circle, Point::Circle(x)).unwrap();
            assert!((circle_to_lebesgue(&d).unwrap() - 0.25).abs() < 1e-12);
        }
        let pts: Vec<Point> = (0..8).map(|i| Point::Circle(i as f64 / 8.0)).collect();
        let grid = EmpiricalMeasure::from_points(PhaseSpace::Circle, &pts).unwrap();
        assert!((circle_to_lebesgue(&grid).unwrap() - 1.0 / 32.0).abs() < 1e-12);
    }

    #[test]
    fn block_counts() {
        let blocks: Vec<u64> = (0..=6).map(|i| 10u64.pow(i)).collect();
        let f = block_end_frequencies(&blocks);
        assert!((f[5].1 - 50505.0 / 111111.0).abs() < 1e-15);
        assert!(f[5].1 > 0.45 && f[6].1 < 0.046);
    }

    #[test]
    fn gaunersdorfer_example() {
        let (sup, inf) = gaunersdorfer_limits((1.0, 2.0), (1.0, 2.0), 1.0, 0.0);
        assert!((sup - 2.0 / 3.0).abs() < 1e-15 && (inf - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn conjugacy_closed_form_period() {
        assert_eq!(logistic_conjugate_iterate(0), logistic_conjugate_iterate(3));
        let x0: f64 = SIN2_PI_OVER_7[..20].parse().unwrap();
        assert!((x0 - logistic_conjugate_iterate(0)).abs() < 1e-15);
    }

    #[test]
    fn registry_covers_names() {
        for name in ["gaunersdorfer", "block_frequencies", "logistic_conjugacy", "lp_enumeration"] {
            assert!(!run_oracle(name).unwrap().is_empty());
        }
        assert!(run_oracle("nope").is_err());
    }
}
