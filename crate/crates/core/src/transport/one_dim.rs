//! Exact W1 on the unit interval and on the circle.

use crate::error::{Error, Result};
use crate::phase_space::{PhaseSpace, Point};

use super::measure::EmpiricalMeasure;

fn scalar(p: &Point) -> f64 {
    match *p {
        Point::Interval(x) | Point::Circle(x) => x,
        _ => f64::NAN,
    }
}

/// Merge two sorted supports into breakpoints with the signed CDF difference
/// `F_mu - F_nu` just after each breakpoint.
fn cdf_difference(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (mu.atoms(), nu.atoms());
    let mut xs = Vec::with_capacity(a.len() + b.len());
    let mut diffs = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    // cumulative sums are kept separately so that F_mu - F_nu is exact zero
    // wherever both reach the same partial mass
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    while i < a.len() || j < b.len() {
        let xa = a.get(i).map_or(f64::INFINITY, |t| scalar(&t.point));
        let xb = b.get(j).map_or(f64::INFINITY, |t| scalar(&t.point));
        let x = xa.min(xb);
        if xa == x {
            fa += a[i].weight;
            i += 1;
        }
        if xb == x {
            fb += b[j].weight;
            j += 1;
        }
        xs.push(x);
        diffs.push(if i == a.len() && j == b.len() { 0.0 } else { fa - fb });
    }
    (xs, diffs)
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, space: PhaseSpace) -> Result<()> {
    if mu.space() != space || nu.space() != space {
        return Err(Error::input(format!(
            "expected two measures on {space}, got {} and {}",
            mu.space(),
            nu.space()
        )));
    }
    Ok(())
}

/// W1 on `[0,1]` as `∫ |F_mu - F_nu|`.
pub fn w1_interval(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_pair(mu, nu, PhaseSpace::UnitInterval)?;
    Ok(interval_unchecked(mu, nu))
}

pub(crate) fn interval_unchecked(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let (xs, diffs) = cdf_difference(mu, nu);
    let mut total = 0.0;
    for k in 0..xs.len().saturating_sub(1) {
        total += (xs[k + 1] - xs[k]) * diffs[k].abs();
    }
    total
}

/// Circular W1: `min_t ∫ |F_mu - F_nu - t|` over one period, attained at a
/// weighted median of the CDF difference. Ties pick the smallest median.
pub fn w1_circle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_pair(mu, nu, PhaseSpace::Circle)?;
    Ok(circle_unchecked(mu, nu))
}

pub(crate) fn circle_unchecked(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let (xs, diffs) = cdf_difference(mu, nu);
    if xs.len() < 2 {
        return 0.0;
    }
    // (value, length) of each constant piece; the wrap piece carries D = 0
    let k = xs.len();
    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(k);
    for i in 0..k - 1 {
        pieces.push((diffs[i], xs[i + 1] - xs[i]));
    }
    pieces.push((0.0, 1.0 - xs[k - 1] + xs[0]));
    let shift = weighted_lower_median(&mut pieces);
    pieces.iter().map(|&(d, len)| len * (d - shift).abs()).sum()
}

/// Smallest `t` minimizing `Σ w |v - t|`, by weighted quickselect.
pub(crate) fn weighted_lower_median(items: &mut [(f64, f64)]) -> f64 {
    let total: f64 = items.iter().map(|e| e.1).sum();
    let half = 0.5 * total;
    let lo = 0usize;
    let mut hi = items.len();
    // weight strictly left of items[lo..hi]
    let mut below = 0.0f64;
    loop {
        let n = hi - lo;
        if n == 1 {
            return items[lo].0;
        }
        let slice = &mut items[lo..hi];
        let mid = n / 2;
        slice.select_nth_unstable_by(mid, |a, b| a.0.total_cmp(&b.0));
        let pivot = slice[mid].0;
        // weight of values strictly below the pivot and equal to it
        let mut less = 0.0;
        let mut equal = 0.0;
        for e in slice.iter() {
            if e.0 < pivot {
                less += e.1;
            } else if e.0 == pivot {
                equal += e.1;
            }
        }
        if below + less >= half && less > 0.0 {
            // the answer is strictly below the pivot
            let mut w = 0;
            for r in 0..n {
                if slice[r].0 < pivot {
                    slice.swap(w, r);
                    w += 1;
                }
            }
            hi = lo + w;
        } else if below + less + equal >= half {
            return pivot;
        } else {
            let mut w = 0;
            for r in 0..n {
                if slice[r].0 > pivot {
                    slice.swap(w, r);
                    w += 1;
                }
            }
            below += less + equal;
            hi = lo + w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on(space: PhaseSpace, pts: &[f64]) -> EmpiricalMeasure {
        let p: Vec<Point> = pts
            .iter()
            .map(|&x| if space == PhaseSpace::Circle { Point::Circle(x) } else { Point::Interval(x) })
            .collect();
        EmpiricalMeasure::from_points(space, &p).unwrap()
    }

    #[test]
    fn interval_examples() {
        let d0 = on(PhaseSpace::UnitInterval, &[0.0]);
        let d1 = on(PhaseSpace::UnitInterval, &[1.0]);
        assert_eq!(w1_interval(&d0, &d1).unwrap(), 1.0);
        assert_eq!(w1_interval(&d0, &d0).unwrap(), 0.0);
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let g = on(PhaseSpace::UnitInterval, &grid);
        let h = on(PhaseSpace::UnitInterval, &[0.5]);
        assert!((w1_interval(&g, &h).unwrap() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn circle_examples() {
        let a = on(PhaseSpace::Circle, &[0.1]);
        let b = on(PhaseSpace::Circle, &[0.4]);
        assert!((w1_circle(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        let c = on(PhaseSpace::Circle, &[0.9]);
        assert!((w1_circle(&a, &c).unwrap() - 0.2).abs() < 1e-15);
        let grid: Vec<f64> = (0..2000).map(|i| i as f64 / 2000.0).collect();
        let g = on(PhaseSpace::Circle, &grid);
        for x in [0.0, 0.123, 0.77] {
            let d = on(PhaseSpace::Circle, &[x]);
            assert!((w1_circle(&g, &d).unwrap() - 0.25).abs() < 1e-3);
        }
    }

    #[test]
    fn space_mismatch_is_an_input_error() {
        let a = on(PhaseSpace::Circle, &[0.1]);
        let b = on(PhaseSpace::UnitInterval, &[0.1]);
        assert!(matches!(w1_circle(&a, &b), Err(Error::Input(_))));
        assert!(matches!(w1_interval(&b, &a), Err(Error::Input(_))));
    }

    #[test]
    fn lower_median_breaks_ties_low() {
        let mut v = vec![(1.0, 0.5), (3.0, 0.5)];
        assert_eq!(weighted_lower_median(&mut v), 1.0);
        let mut v = vec![(5.0, 0.125), (-2.0, 0.25), (0.0, 0.25), (7.0, 0.375)];
        assert_eq!(weighted_lower_median(&mut v), 0.0);
        let mut v = vec![(5.0, 0.125), (-2.0, 0.25), (0.0, 0.125), (7.0, 0.5)];
        assert_eq!(weighted_lower_median(&mut v), 5.0);
        let mut v = vec![(2.0, 0.25), (2.0, 0.25), (1.0, 0.2), (9.0, 0.3)];
        assert_eq!(weighted_lower_median(&mut v), 2.0);
    }
}
