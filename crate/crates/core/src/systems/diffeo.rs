//! Piecewise-linear annulus homeomorphisms built from exactly invertible warps,
//! the bump construction that concentrates a thin sector onto most of the
//! annulus, covering-map lifts and grid-based verification.
//!
//! Coordinates are `(r, theta)` with `r` in `[0,1]` and `theta` in `[0,1)`. A
//! primitive with fold `q` acts on each sector `[k/q, (k+1)/q)` through the
//! local coordinate `s = frac(q * theta)`, so it commutes with rotation by
//! `1/q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{arc_distance, wrap_angle};

/// Breakpoints `(x, y)` of a piecewise-linear function on `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Knots(pub Vec<[f64; 2]>);

impl Knots {
    pub fn new(points: &[(f64, f64)]) -> Self {
        Knots(points.iter().map(|&(x, y)| [x, y]).collect())
    }

    fn check_domain(&self, what: &str) -> Result<()> {
        let k = &self.0;
        if k.len() < 2 {
            return Err(Error::input(format!("{what}: need at least two knots")));
        }
        if k[0][0] != 0.0 || k[k.len() - 1][0] != 1.0 {
            return Err(Error::input(format!("{what}: knots must span [0,1]")));
        }
        if k.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::input(format!("{what}: non-finite knot")));
        }
        if k.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::input(format!("{what}: knot abscissae must increase strictly")));
        }
        Ok(())
    }

    /// Increasing homeomorphism of `[0,1]`.
    fn check_homeomorphism(&self, what: &str) -> Result<()> {
        self.check_domain(what)?;
        let k = &self.0;
        if k[0][1] != 0.0 || k[k.len() - 1][1] != 1.0 || k.windows(2).any(|w| w[1][1] <= w[0][1]) {
            return Err(Error::input(format!("{what}: must be an increasing map of [0,1] onto itself")));
        }
        Ok(())
    }

    /// Weight profile with values in `[0,1]`.
    fn check_weight(&self, what: &str) -> Result<()> {
        self.check_domain(what)?;
        if self.0.iter().any(|p| !(0.0..=1.0).contains(&p[1])) {
            return Err(Error::input(format!("{what}: weights must lie in [0,1]")));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.0;
        let x = x.clamp(0.0, 1.0);
        let i = k.partition_point(|p| p[0] <= x).clamp(1, k.len() - 1);
        let (a, b) = (k[i - 1], k[i]);
        if a[0] == a[1] && b[0] == b[1] {
            return x;
        }
        let t = (x - a[0]) / (b[0] - a[0]);
        a[1] + t * (b[1] - a[1])
    }

    /// Inverse of an increasing homeomorphism.
    pub fn inverse(&self, y: f64) -> f64 {
        let k = &self.0;
        let y = y.clamp(0.0, 1.0);
        let i = k.partition_point(|p| p[1] <= y).clamp(1, k.len() - 1);
        let (a, b) = (k[i - 1], k[i]);
        if a[0] == a[1] && b[0] == b[1] {
            return y;
        }
        let t = (y - a[1]) / (b[1] - a[1]);
        a[0] + t * (b[0] - a[0])
    }

    /// Inverse of `x -> (1-w) x + w * self(x)` for a homeomorphism `self`.
    fn blended_inverse(&self, w: f64, y: f64) -> f64 {
        if w == 0.0 {
            return y;
        }
        let k = &self.0;
        let blend = |p: &[f64; 2]| (1.0 - w) * p[0] + w * p[1];
        let y = y.clamp(0.0, 1.0);
        let i = k.partition_point(|p| blend(p) <= y).clamp(1, k.len() - 1);
        let (a, b) = (&k[i - 1], &k[i]);
        let (ya, yb) = (blend(a), blend(b));
        let t = (y - ya) / (yb - ya);
        a[0] + t * (b[0] - a[0])
    }

    /// Largest `x0` with `self(x) = x` on `[0, x0]`.
    fn identity_prefix(&self) -> f64 {
        let mut reach = 0.0;
        for w in self.0.windows(2) {
            if w[0][0] == w[0][1] && w[1][0] == w[1][1] {
                reach = w[1][0];
            } else {
                break;
            }
        }
        reach
    }

    /// Largest `x0` with `self(x) = 0` on `[0, x0]`.
    fn zero_prefix(&self) -> f64 {
        let mut reach = 0.0;
        for w in self.0.windows(2) {
            if w[0][1] == 0.0 && w[1][1] == 0.0 {
                reach = w[1][0];
            } else {
                break;
            }
        }
        reach
    }
}

/// One exactly invertible building block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Warp {
    /// `(r, t) -> (P(r), t)`.
    RadialWarp { profile: Knots },
    /// `s -> (1 - w(r)) s + w(r) psi(s)` on each of `fold` sectors.
    AngularWarp { psi: Knots, weight: Knots, fold: u64 },
    /// `r -> (1 - v(s)) r + v(s) Q(r)` with `s` the sector coordinate.
    RadialByAngle { profile: Knots, weight: Knots, fold: u64 },
    /// `t -> t + shift(r) / fold`.
    Shear { shift: Knots, fold: u64 },
}

#[inline]
fn sector(theta: f64, fold: u64) -> (f64, f64) {
    let phi = theta * fold as f64;
    let k = phi.floor();
    let s = phi - k;
    (k, s.clamp(0.0, 1.0))
}

#[inline]
fn unsector(k: f64, s: f64, fold: u64) -> f64 {
    wrap_angle((k + s) / fold as f64)
}

impl Warp {
    fn validate(&self) -> Result<()> {
        let fold_ok = |q: u64| {
            if q == 0 {
                Err(Error::input("warp fold must be at least 1"))
            } else {
                Ok(())
            }
        };
        match self {
            Warp::RadialWarp { profile } => profile.check_homeomorphism("radial warp"),
            Warp::AngularWarp { psi, weight, fold } => {
                fold_ok(*fold)?;
                psi.check_homeomorphism("angular warp psi")?;
                weight.check_weight("angular warp weight")
            }
            Warp::RadialByAngle { profile, weight, fold } => {
                fold_ok(*fold)?;
                profile.check_homeomorphism("radial-by-angle profile")?;
                weight.check_weight("radial-by-angle weight")?;
                let k = &weight.0;
                if k[0][1] != k[k.len() - 1][1] {
                    return Err(Error::input("radial-by-angle weight must be periodic"));
                }
                Ok(())
            }
            Warp::Shear { shift, fold } => {
                fold_ok(*fold)?;
                shift.check_domain("shear")
            }
        }
    }

    fn apply(&self, r: f64, theta: f64) -> (f64, f64) {
        match self {
            Warp::RadialWarp { profile } => (profile.eval(r), theta),
            Warp::AngularWarp { psi, weight, fold } => {
                let w = weight.eval(r);
                if w == 0.0 {
                    return (r, theta);
                }
                let (k, s) = sector(theta, *fold);
                let s2 = (1.0 - w) * s + w * psi.eval(s);
                (r, unsector(k, s2, *fold))
            }
            Warp::RadialByAngle { profile, weight, fold } => {
                let (_, s) = sector(theta, *fold);
                let v = weight.eval(s);
                let q = profile.eval(r);
                if v == 0.0 || q == r {
                    return (r, theta);
                }
                ((1.0 - v) * r + v * q, theta)
            }
            Warp::Shear { shift, fold } => (r, wrap_angle(theta + shift.eval(r) / *fold as f64)),
        }
    }

    fn invert(&self, r: f64, theta: f64) -> (f64, f64) {
        match self {
            Warp::RadialWarp { profile } => (profile.inverse(r), theta),
            Warp::AngularWarp { psi, weight, fold } => {
                let w = weight.eval(r);
                if w == 0.0 {
                    return (r, theta);
                }
                let (k, s) = sector(theta, *fold);
                (r, unsector(k, psi.blended_inverse(w, s), *fold))
            }
            Warp::RadialByAngle { profile, weight, fold } => {
                let (_, s) = sector(theta, *fold);
                (profile.blended_inverse(weight.eval(s), r), theta)
            }
            Warp::Shear { shift, fold } => (r, wrap_angle(theta - shift.eval(r) / *fold as f64)),
        }
    }

    fn lifted(&self, q: u64) -> Warp {
        match self.clone() {
            Warp::RadialWarp { profile } => Warp::RadialWarp { profile },
            Warp::AngularWarp { psi, weight, fold } => Warp::AngularWarp { psi, weight, fold: fold * q },
            Warp::RadialByAngle { profile, weight, fold } => {
                Warp::RadialByAngle { profile, weight, fold: fold * q }
            }
            Warp::Shear { shift, fold } => Warp::Shear { shift, fold: fold * q },
        }
    }

    /// Radius below which the warp is exactly the identity.
    fn identity_radius(&self) -> f64 {
        match self {
            Warp::RadialWarp { profile } => profile.identity_prefix(),
            Warp::AngularWarp { weight, .. } => weight.zero_prefix(),
            Warp::RadialByAngle { profile, .. } => profile.identity_prefix(),
            Warp::Shear { shift, .. } => shift.zero_prefix(),
        }
    }
}

/// An annulus homeomorphism: the warps are applied in list order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffeoSpec {
    pub warps: Vec<Warp>,
}

impl DiffeoSpec {
    pub fn identity() -> Self {
        DiffeoSpec::default()
    }

    pub fn is_identity(&self) -> bool {
        self.warps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.warps.iter().try_for_each(Warp::validate)
    }

    pub fn apply(&self, r: f64, theta: f64) -> (f64, f64) {
        self.warps.iter().fold((r, theta), |(r, t), w| w.apply(r, t))
    }

    pub fn apply_inverse(&self, r: f64, theta: f64) -> (f64, f64) {
        self.warps.iter().rev().fold((r, theta), |(r, t), w| w.invert(r, t))
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &DiffeoSpec) -> DiffeoSpec {
        let mut warps = self.warps.clone();
        warps.extend(other.warps.iter().cloned());
        DiffeoSpec { warps }
    }

    /// Radius below which the whole composition is exactly the identity.
    pub fn identity_radius(&self) -> f64 {
        self.warps.iter().map(Warp::identity_radius).fold(1.0, f64::min)
    }

    /// Largest `|apply_inverse(apply(x)) - x|` in the annulus metric on an
    /// `n x n` grid of cell centres.
    pub fn inverse_residual(&self, n: usize) -> f64 {
        let mut worst = 0.0f64;
        for (r, t) in grid(n) {
            let (a, b) = self.apply(r, t);
            let (r2, t2) = self.apply_inverse(a, b);
            worst = worst.max((r2 - r).abs().max(arc_distance(t2, t)));
            let (c, d) = self.apply_inverse(r, t);
            let (r3, t3) = self.apply(c, d);
            worst = worst.max((r3 - r).abs().max(arc_distance(t3, t)));
        }
        worst
    }
}

/// Centres of an `n x n` grid on the annulus.
fn grid(n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = 1.0 / n as f64;
    (0..n).flat_map(move |i| (0..n).map(move |j| ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)))
}

/// Lift through the covering `(r, t) -> (r, q t)`, choosing the branch that is
/// the identity near the inner boundary. Each sector of width `1/q` carries a
/// copy of the original map.
pub fn lift_diffeo(g_hat: &DiffeoSpec, q: u64) -> Result<DiffeoSpec> {
    if q == 0 {
        return Err(Error::input("lift degree q must be at least 1"));
    }
    g_hat.validate()?;
    Ok(DiffeoSpec { warps: g_hat.warps.iter().map(|w| w.lifted(q)).collect() })
}

/// Bump diffeomorphism that is the identity near `r = 0`, blows the sector
/// `B1 = [r1,r2] x [0,theta)` up to area above `sigma_area` and pushes
/// `B2 = [r1,r2] x [theta,1)` into `{r < eps}`.
pub fn build_bump_diffeo(r1: f64, r2: f64, theta: f64, eps: f64, sigma_area: f64) -> Result<DiffeoSpec> {
    let all_finite = [r1, r2, theta, eps, sigma_area].iter().all(|v| v.is_finite());
    if !all_finite || !(0.0 < r1 && r1 < r2 && r2 < 1.0) {
        return Err(Error::input(format!("need 0 < r1 < r2 < 1, got r1={r1}, r2={r2}")));
    }
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::input(format!("theta must lie in (0,1), got {theta}")));
    }
    if !(0.0 < eps && eps < r1) {
        return Err(Error::input(format!("eps must lie in (0, r1), got {eps}")));
    }
    if !(0.0 < sigma_area && sigma_area < 1.0) {
        return Err(Error::input(format!("sigma_area must lie in (0,1), got {sigma_area}")));
    }
    // Everything outside {eps < r} and a thin angular strip is available.
    let slack = 1.0 - eps - sigma_area;
    if slack <= 0.0 {
        return Err(Error::Construction {
            property: "(ii) area of g(B1)".into(),
            detail: format!("sigma_area {sigma_area} leaves no room outside the eps={eps} collar"),
        });
    }
    let dr = slack / 16.0;
    let eta = slack / 8.0;
    let tau = slack / 16.0;
    if theta >= 1.0 - eta {
        return Err(Error::Construction {
            property: "(ii) area of g(B1)".into(),
            detail: format!("theta {theta} too close to 1 for the angular stretch"),
        });
    }
    let inner = 0.6 * eps;

    // The angular sector [0, theta) is stretched onto [0, 1 - eta) for r >= r1.
    let angular = Warp::AngularWarp {
        psi: Knots::new(&[(0.0, 0.0), (theta, 1.0 - eta), (1.0, 1.0)]),
        weight: Knots::new(&[(0.0, 0.0), (inner, 0.0), (r1, 1.0), (1.0, 1.0)]),
        fold: 1,
    };
    // Over the compressed strip [1 - eta, 1) the band [r1, r2] collapses into
    // [0.7 eps, 0.9 eps].
    let squeeze = Warp::RadialByAngle {
        profile: Knots::new(&[(0.0, 0.0), (inner, inner), (r1, 0.7 * eps), (r2, 0.9 * eps), (1.0, 1.0)]),
        weight: Knots::new(&[(0.0, 1.0), (tau, 0.0), (1.0 - eta - tau, 0.0), (1.0 - eta, 1.0), (1.0, 1.0)]),
        fold: 1,
    };
    // The band itself is spread over (eps, 1).
    let spread = Warp::RadialWarp {
        profile: Knots::new(&[(0.0, 0.0), (eps, eps), (r1, eps + dr), (r2, 1.0 - dr), (1.0, 1.0)]),
    };
    let g = DiffeoSpec { warps: vec![angular, squeeze, spread] };
    g.validate()?;

    let area_floor = (1.0 - eps - 2.0 * dr) * (1.0 - eta - 2.0 * tau);
    if area_floor <= sigma_area {
        return Err(Error::Construction {
            property: "(ii) area of g(B1)".into(),
            detail: format!("guaranteed area {area_floor} does not exceed {sigma_area}"),
        });
    }
    Ok(g)
}

/// Outcome of [`verify_sublemma`]. Margins are positive exactly when the
/// corresponding property passes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublemmaReport {
    pub identity_passed: bool,
    pub max_displacement: f64,
    pub identity_margin: f64,
    pub area_passed: bool,
    pub area_estimate: f64,
    pub area_error_bound: f64,
    pub area_margin: f64,
    pub squeeze_passed: bool,
    pub max_radius_b2: f64,
    pub squeeze_margin: f64,
}

impl SublemmaReport {
    pub fn all_passed(&self) -> bool {
        self.identity_passed && self.area_passed && self.squeeze_passed
    }
}

/// Displacement tolerance on the identity collar.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Check the three bump properties on grids of resolution `grid_n`:
/// (i) identity on `{r <= eps/2}`, (ii) `Leb(g(B1)) > sigma_area` with a
/// quadrature error bound, (iii) `g(B2) ⊂ {r < eps}`.
pub fn verify_sublemma(
    g_hat: &DiffeoSpec,
    r1: f64,
    r2: f64,
    theta: f64,
    eps: f64,
    sigma_area: f64,
    grid_n: usize,
) -> Result<SublemmaReport> {
    if grid_n < 100 {
        return Err(Error::input(format!("grid_n must be at least 100, got {grid_n}")));
    }
    if !(0.0 < r1 && r1 < r2 && r2 <= 1.0 && 0.0 < theta && theta < 1.0 && eps > 0.0) {
        return Err(Error::input("verify_sublemma parameters out of range"));
    }
    g_hat.validate()?;
    let n = grid_n;
    let nf = n as f64;

    // (i) closed grid on [0, eps/2] x [0,1)
    let mut max_disp = 0.0f64;
    for i in 0..=n {
        let r = 0.5 * eps * i as f64 / nf;
        for j in 0..n {
            let t = j as f64 / nf;
            let (a, b) = g_hat.apply(r, t);
            max_disp = max_disp.max((a - r).abs().max(arc_distance(b, t)));
        }
    }

    // (ii) indicator of g^-1(y) in B1 at cell corners and centres
    let in_b1 = |r: f64, t: f64| {
        let (a, b) = g_hat.apply_inverse(r, t);
        a >= r1 && a <= r2 && b < theta
    };
    let corners: Vec<bool> = (0..=n)
        .flat_map(|i| (0..=n).map(move |j| (i, j)))
        .map(|(i, j)| in_b1(i as f64 / nf, wrap_angle(j as f64 / nf)))
        .collect();
    let corner = |i: usize, j: usize| corners[i * (n + 1) + j];
    let mut inside = 0usize;
    let mut uncertain = 0usize;
    for i in 0..n {
        for j in 0..n {
            let c = in_b1((i as f64 + 0.5) / nf, (j as f64 + 0.5) / nf);
            inside += c as usize;
            let same = [corner(i, j), corner(i + 1, j), corner(i, j + 1), corner(i + 1, j + 1)]
                .iter()
                .all(|&v| v == c);
            uncertain += (!same) as usize;
        }
    }
    let cells = (n * n) as f64;
    let area = inside as f64 / cells;
    let area_err = uncertain as f64 / cells;

    // (iii) closed grid on B2
    let mut max_r = 0.0f64;
    for i in 0..=n {
        let r = r1 + (r2 - r1) * i as f64 / nf;
        for j in 0..=n {
            let t = theta + (1.0 - theta) * j as f64 / nf;
            let (a, _) = g_hat.apply(r, wrap_angle(t));
            max_r = max_r.max(a);
        }
    }

    Ok(SublemmaReport {
        identity_passed: max_disp <= IDENTITY_TOLERANCE,
        max_displacement: max_disp,
        identity_margin: IDENTITY_TOLERANCE - max_disp,
        area_passed: area - area_err > sigma_area,
        area_estimate: area,
        area_error_bound: area_err,
        area_margin: area - area_err - sigma_area,
        squeeze_passed: max_r < eps,
        max_radius_b2: max_r,
        squeeze_margin: eps - max_r,
    })
}

/// Largest annulus-metric discrepancy between `g∘R` and `R∘g` for rotation by
/// `shift`, over an `n x n` grid.
pub fn commutation_residual(g: &DiffeoSpec, shift: f64, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for (r, t) in grid(n) {
        let (a1, b1) = g.apply(r, wrap_angle(t + shift));
        let (a2, b2) = g.apply(r, t);
        let b2 = wrap_angle(b2 + shift);
        worst = worst.max((a1 - a2).abs().max(arc_distance(b1, b2)));
    }
    worst
}

/// Largest discrepancy between `pi∘g` and `g_hat∘pi` for `pi(r,t) = (r, q t)`.
pub fn covering_residual(g: &DiffeoSpec, g_hat: &DiffeoSpec, q: u64, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for (r, t) in grid(n) {
        let (a1, b1) = g.apply(r, t);
        let b1 = wrap_angle(b1 * q as f64);
        let (a2, b2) = g_hat.apply(r, wrap_angle(t * q as f64));
        worst = worst.max((a1 - a2).abs().max(arc_distance(b1, b2)));
    }
    worst
}
