//! Concrete dynamical families and their orbits.

pub mod bowen;
pub mod diffeo;
pub mod precise;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{wrap_angle, PhaseSpace, Point};

pub use bowen::{
    bowen_running_averages, running_extremes, saddle_passage, BowenParams, BowenTrajectory, PassageRecord, Saddle,
    Segment,
};
pub use diffeo::{
    build_bump_diffeo, commutation_residual, covering_residual, lift_diffeo, verify_sublemma, DiffeoSpec, Knots,
    SublemmaReport, Warp,
};
pub use precise::{required_bits, FixedReal, GUARD_BITS};

use precise::{PreciseMap, PreciseOrbit};

/// A parameterized family member. Serialized with a `"type"` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Family {
    /// `x -> lambda x (1 - x)`, `lambda` in `[0,4]`.
    Logistic { lambda: f64 },
    /// `t -> t + alpha mod 1`.
    Rotation { alpha: f64 },
    /// `x -> base * x mod 1`.
    ExpandingTimes { base: u64 },
    /// Shift orbit of the word made of alternating all-zero and `0101...`
    /// blocks of the given lengths.
    ShiftOnBlocks { blocks: Vec<u64> },
    /// `z -> z^2 + c` on its invariant interval, rescaled to `[0,1]`:
    /// `x -> 1 - 2b x (1 - x)` with `b = (1 + sqrt(1 - 4c)) / 2`.
    QuadraticInterval { c: f64 },
    /// `h∘g∘R_alpha∘g^-1∘h^-1` on the annulus.
    AnosovKatok {
        #[serde(default)]
        h: DiffeoSpec,
        g: DiffeoSpec,
        alpha: f64,
    },
    /// Heteroclinic-cycle surrogate seen through the two-point space
    /// `{A = word 0, B = word 1}`; "time n" is continuous time.
    BowenSurrogate { params: BowenParams, u0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub family: Family,
    pub space: PhaseSpace,
}

/// Orbit length and working precision for expanding maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitBudget {
    pub iterations: usize,
    pub precision_bits: u64,
}

impl OrbitBudget {
    pub fn new(iterations: usize, precision_bits: u64) -> Self {
        OrbitBudget { iterations, precision_bits }
    }

    /// Smallest budget that satisfies the precision invariant for `spec`.
    pub fn sufficient(spec: &SystemSpec, iterations: usize) -> Self {
        let bits = match spec.slope_bound() {
            Some(s) => required_bits(s, iterations),
            None => GUARD_BITS,
        };
        OrbitBudget { iterations, precision_bits: bits }
    }

    /// The same precision with a different length, re-sized if required.
    pub fn with_iterations(&self, spec: &SystemSpec, iterations: usize) -> Self {
        let need = OrbitBudget::sufficient(spec, iterations).precision_bits;
        OrbitBudget { iterations, precision_bits: self.precision_bits.max(need) }
    }
}

impl SystemSpec {
    pub fn new(family: Family, space: PhaseSpace) -> Result<Self> {
        let spec = SystemSpec { family, space };
        spec.validate()?;
        Ok(spec)
    }

    pub fn logistic(lambda: f64) -> Self {
        SystemSpec { family: Family::Logistic { lambda }, space: PhaseSpace::UnitInterval }
    }

    pub fn rotation(alpha: f64) -> Self {
        SystemSpec { family: Family::Rotation { alpha }, space: PhaseSpace::Circle }
    }

    /// The identity of the circle.
    pub fn identity() -> Self {
        Self::rotation(0.0)
    }

    /// Golden-mean rotation `(sqrt 5 - 1) / 2`.
    pub fn golden_rotation() -> Self {
        Self::rotation(golden())
    }

    pub fn expanding(base: u64) -> Self {
        SystemSpec { family: Family::ExpandingTimes { base }, space: PhaseSpace::Circle }
    }

    pub fn shift_on_blocks(blocks: Vec<u64>, depth: u32) -> Self {
        SystemSpec { family: Family::ShiftOnBlocks { blocks }, space: PhaseSpace::BinaryShift { depth } }
    }

    pub fn quadratic(c: f64) -> Self {
        SystemSpec { family: Family::QuadraticInterval { c }, space: PhaseSpace::UnitInterval }
    }

    pub fn bowen(params: BowenParams, u0: f64) -> Self {
        SystemSpec { family: Family::BowenSurrogate { params, u0 }, space: PhaseSpace::BinaryShift { depth: 1 } }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        let space_ok = matches!(
            (&self.family, self.space),
            (Family::Logistic { .. } | Family::QuadraticInterval { .. }, PhaseSpace::UnitInterval)
                | (Family::Rotation { .. }, PhaseSpace::Circle)
                | (Family::ExpandingTimes { .. }, PhaseSpace::Circle | PhaseSpace::UnitInterval)
                | (Family::ShiftOnBlocks { .. }, PhaseSpace::BinaryShift { .. })
                | (Family::AnosovKatok { .. }, PhaseSpace::Annulus)
                | (Family::BowenSurrogate { .. }, PhaseSpace::BinaryShift { depth: 1 })
        );
        if !space_ok {
            return Err(Error::input(format!(
                "family {} does not act on space {}",
                self.family_name(),
                self.space
            )));
        }
        match &self.family {
            Family::Logistic { lambda } => {
                if !(0.0..=4.0).contains(lambda) {
                    return Err(Error::input(format!("logistic lambda {lambda} outside [0,4]")));
                }
            }
            Family::Rotation { alpha } => {
                if !(0.0..1.0).contains(alpha) {
                    return Err(Error::input(format!("rotation alpha {alpha} outside [0,1)")));
                }
            }
            Family::ExpandingTimes { base } => {
                if *base < 2 {
                    return Err(Error::input(format!("expanding base {base} must be at least 2")));
                }
            }
            Family::ShiftOnBlocks { blocks } => {
                if blocks.is_empty() || blocks.contains(&0) {
                    return Err(Error::input("shift blocks must be a nonempty list of positive lengths"));
                }
                blocks
                    .iter()
                    .try_fold(0u64, |acc, &b| acc.checked_add(b))
                    .ok_or_else(|| Error::input("total block length overflows"))?;
            }
            Family::QuadraticInterval { c } => {
                if !(-2.0..=0.25).contains(c) {
                    return Err(Error::input(format!("quadratic parameter c {c} outside [-2, 1/4]")));
                }
            }
            Family::AnosovKatok { h, g, alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::input(format!("alpha_prime {alpha} outside (0,1)")));
                }
                h.validate()?;
                g.validate()?;
            }
            Family::BowenSurrogate { params, u0 } => {
                params.validate()?;
                if !(*u0 > 0.0 && *u0 < params.box_h) {
                    return Err(Error::input(format!("u0 {u0} must lie in (0, box_h)")));
                }
            }
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Logistic { .. } => "logistic",
            Family::Rotation { .. } => "rotation",
            Family::ExpandingTimes { .. } => "expanding_times",
            Family::ShiftOnBlocks { .. } => "shift_on_blocks",
            Family::QuadraticInterval { .. } => "quadratic_interval",
            Family::AnosovKatok { .. } => "anosov_katok",
            Family::BowenSurrogate { .. } => "bowen_surrogate",
        }
    }

    /// Lipschitz constant when the family is iterated in big-integer
    /// arithmetic, `None` otherwise.
    pub fn slope_bound(&self) -> Option<f64> {
        match self.family {
            Family::Logistic { lambda } if lambda > 1.0 => Some(lambda),
            Family::ExpandingTimes { base } => Some(base as f64),
            Family::QuadraticInterval { c } => {
                let k = quadratic_slope(c);
                (k > 1.0).then_some(k)
            }
            _ => None,
        }
    }

    fn precise_map(&self) -> Option<PreciseMap> {
        match self.family {
            Family::Logistic { lambda } if lambda > 1.0 => Some(PreciseMap::logistic(lambda)),
            Family::ExpandingTimes { base } => Some(PreciseMap::times(base)),
            Family::QuadraticInterval { c } if quadratic_slope(c) > 1.0 => {
                Some(PreciseMap::folded_quadratic(quadratic_slope(c)))
            }
            _ => None,
        }
    }

    pub fn check_budget(&self, budget: &OrbitBudget) -> Result<()> {
        if budget.iterations == 0 {
            return Err(Error::input("orbit budget needs at least one iteration"));
        }
        if budget.precision_bits == 0 {
            return Err(Error::Config("precision_bits must be positive".into()));
        }
        if let Some(slope) = self.slope_bound() {
            let need = required_bits(slope, budget.iterations);
            if budget.precision_bits < need {
                return Err(Error::Config(format!(
                    "{} iterations of {} need at least {need} precision bits, budget has {}",
                    budget.iterations,
                    self.family_name(),
                    budget.precision_bits
                )));
            }
        }
        Ok(())
    }
}

/// `(sqrt 5 - 1) / 2`.
pub fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Slope `2b` of the rescaled quadratic map.
fn quadratic_slope(c: f64) -> f64 {
    1.0 + (1.0 - 4.0 * c).max(0.0).sqrt()
}

/// Rotate an annulus point by `alpha`.
fn rotate(r: f64, t: f64, alpha: f64) -> (f64, f64) {
    (r, wrap_angle(t + alpha))
}

fn ak_step(h: &DiffeoSpec, g: &DiffeoSpec, alpha: f64, r: f64, t: f64) -> (f64, f64) {
    let (r, t) = h.apply_inverse(r, t);
    let (r, t) = g.apply_inverse(r, t);
    let (r, t) = rotate(r, t, alpha);
    let (r, t) = g.apply(r, t);
    h.apply(r, t)
}

/// One application of the map.
pub fn step(spec: &SystemSpec, x: &Point) -> Result<Point> {
    spec.validate()?;
    spec.space.check(x)?;
    step_unchecked(spec, x)
}

fn step_unchecked(spec: &SystemSpec, x: &Point) -> Result<Point> {
    let out = match (&spec.family, *x) {
        (Family::Logistic { lambda }, Point::Interval(v)) => Point::Interval(lambda * v * (1.0 - v)),
        (Family::QuadraticInterval { c }, Point::Interval(v)) => {
            Point::Interval(1.0 - quadratic_slope(*c) * v * (1.0 - v))
        }
        (Family::Rotation { alpha }, Point::Circle(t)) => Point::Circle(wrap_angle(t + alpha)),
        (Family::ExpandingTimes { base }, Point::Circle(t)) => Point::Circle(wrap_angle(*base as f64 * t)),
        (Family::ExpandingTimes { base }, Point::Interval(t)) => Point::Interval(wrap_angle(*base as f64 * t)),
        (Family::AnosovKatok { h, g, alpha }, Point::Annulus { radius, angle }) => {
            let (r, t) = ak_step(h, g, *alpha, radius, angle);
            Point::Annulus { radius: r, angle: t }
        }
        (Family::ShiftOnBlocks { .. }, _) => {
            return Err(Error::Unsupported(
                "shift-on-blocks generates a single orbit; a truncated word has no unique image".into(),
            ))
        }
        (Family::BowenSurrogate { .. }, _) => {
            return Err(Error::Unsupported("the heteroclinic surrogate is a flow; use its trajectory".into()))
        }
        _ => return Err(Error::input("point kind does not match the system")),
    };
    spec.space.canonicalize(out)
}

/// The first `budget.iterations` points of the orbit of `x0`.
pub fn orbit(spec: &SystemSpec, x0: &Point, budget: &OrbitBudget) -> Result<Vec<Point>> {
    Ok(orbit_iter(spec, x0, budget)?.collect())
}

/// Orbit of an expanding map started from a decimal seed carried at full
/// budget precision.
pub fn orbit_from_decimal(spec: &SystemSpec, seed: &str, budget: &OrbitBudget) -> Result<Vec<Point>> {
    spec.validate()?;
    spec.check_budget(budget)?;
    let map = spec
        .precise_map()
        .ok_or_else(|| Error::Unsupported(format!("{} is not iterated in extended precision", spec.family_name())))?;
    let fixed = FixedReal::from_decimal(seed, budget.precision_bits)?;
    let slope = spec.slope_bound().unwrap_or(1.0);
    let wrap = matches!(spec.space, PhaseSpace::Circle);
    Ok(PreciseOrbit::new(map, fixed, budget.iterations, slope)
        .map(|v| if wrap { Point::Circle(wrap_angle(v)) } else { Point::Interval(v) })
        .collect())
}

/// Streaming orbit; see [`orbit`].
pub fn orbit_iter(spec: &SystemSpec, x0: &Point, budget: &OrbitBudget) -> Result<OrbitIter> {
    spec.validate()?;
    spec.space.check(x0)?;
    spec.check_budget(budget)?;
    let n = budget.iterations;
    if let Some(map) = spec.precise_map() {
        let v = match *x0 {
            Point::Interval(v) | Point::Circle(v) => v,
            _ => return Err(Error::input("expanding maps act on real points")),
        };
        let fixed = FixedReal::from_f64(v, budget.precision_bits)?;
        let slope = spec.slope_bound().unwrap_or(1.0);
        let circle = matches!(spec.space, PhaseSpace::Circle);
        return Ok(OrbitIter(IterState::Precise { inner: PreciseOrbit::new(map, fixed, n, slope), circle }));
    }
    match &spec.family {
        Family::ShiftOnBlocks { blocks } => {
            let depth = spec.space.shift_depth().unwrap_or(1);
            Ok(OrbitIter(IterState::Blocks(BlockWindows::new(blocks.clone(), depth, n))))
        }
        Family::BowenSurrogate { .. } => Err(Error::Unsupported(
            "the heteroclinic surrogate is a flow; use empirical measures in continuous time".into(),
        )),
        _ => Ok(OrbitIter(IterState::Float { spec: spec.clone(), current: *x0, remaining: n })),
    }
}

/// Lazily generated orbit points.
pub struct OrbitIter(IterState);

enum IterState {
    Precise { inner: PreciseOrbit, circle: bool },
    Float { spec: SystemSpec, current: Point, remaining: usize },
    Blocks(BlockWindows),
}

impl Iterator for OrbitIter {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        match &mut self.0 {
            IterState::Precise { inner, circle } => inner.next().map(|v| {
                if *circle {
                    Point::Circle(wrap_angle(v))
                } else {
                    Point::Interval(v)
                }
            }),
            IterState::Float { spec, current, remaining } => {
                if *remaining == 0 {
                    return None;
                }
                *remaining -= 1;
                let out = *current;
                if *remaining > 0 {
                    // families on this path never fail on in-space points
                    *current = step_unchecked(spec, current).unwrap_or(out);
                }
                Some(out)
            }
            IterState::Blocks(b) => b.next(),
        }
    }
}

/// Symbols of the block word followed by zeros.
#[derive(Clone, Debug)]
struct BlockSymbols {
    blocks: Vec<u64>,
    block: usize,
    offset: u64,
}

impl BlockSymbols {
    fn new(blocks: Vec<u64>) -> Self {
        BlockSymbols { blocks, block: 0, offset: 0 }
    }

    fn next_symbol(&mut self) -> u64 {
        if self.block >= self.blocks.len() {
            return 0;
        }
        let sym = if self.block % 2 == 1 { self.offset & 1 } else { 0 };
        self.offset += 1;
        if self.offset == self.blocks[self.block] {
            self.block += 1;
            self.offset = 0;
        }
        sym
    }
}

/// Depth-`D` windows of the block word at successive positions.
#[derive(Clone, Debug)]
struct BlockWindows {
    symbols: BlockSymbols,
    window: u64,
    mask: u64,
    remaining: usize,
}

impl BlockWindows {
    fn new(blocks: Vec<u64>, depth: u32, len: usize) -> Self {
        let mut symbols = BlockSymbols::new(blocks);
        let mut window = 0u64;
        for _ in 0..depth {
            window = (window << 1) | symbols.next_symbol();
        }
        let mask = if depth >= 64 { u64::MAX } else { (1u64 << depth) - 1 };
        BlockWindows { symbols, window, mask, remaining: len }
    }
}

impl Iterator for BlockWindows {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = Point::Word(self.window);
        self.window = ((self.window << 1) | self.symbols.next_symbol()) & self.mask;
        Some(out)
    }
}

/// Symbol `i` of the block word.
pub fn block_symbol(blocks: &[u64], i: u64) -> u8 {
    let mut start = 0u64;
    for (b, &len) in blocks.iter().enumerate() {
        if i < start + len {
            return if b % 2 == 1 { ((i - start) & 1) as u8 } else { 0 };
        }
        start += len;
    }
    0
}

/// `h∘g∘R_alpha∘g^-1∘h^-1` on the annulus; `h` defaults to the identity.
pub fn ak_map(h: Option<DiffeoSpec>, g: DiffeoSpec, alpha_prime: f64) -> Result<SystemSpec> {
    SystemSpec::new(
        Family::AnosovKatok { h: h.unwrap_or_default(), g, alpha: alpha_prime },
        PhaseSpace::Annulus,
    )
}

/// `(h∘g)^-1` applied to an annulus point of an Anosov-Katok system.
pub fn ak_straighten(spec: &SystemSpec, x: &Point) -> Result<(f64, f64)> {
    match (&spec.family, *x) {
        (Family::AnosovKatok { h, g, .. }, Point::Annulus { radius, angle }) => {
            let (r, t) = h.apply_inverse(radius, angle);
            Ok(g.apply_inverse(r, t))
        }
        _ => Err(Error::input("ak_straighten needs an Anosov-Katok system and an annulus point")),
    }
}

/// Fraction of the first `n` iterates whose straightened angle `t` has
/// `frac(fold * t)` in `[0, theta)`.
pub fn band_occupancy(spec: &SystemSpec, x0: &Point, n: usize, theta: f64, fold: u64) -> Result<f64> {
    if n == 0 || fold == 0 {
        return Err(Error::input("band occupancy needs n >= 1 and fold >= 1"));
    }
    let budget = OrbitBudget::sufficient(spec, n);
    let mut hits = 0usize;
    for p in orbit_iter(spec, x0, &budget)? {
        let (_, t) = ak_straighten(spec, &p)?;
        if wrap_angle(t * fold as f64) < theta {
            hits += 1;
        }
    }
    Ok(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_examples() {
        let y = step(&SystemSpec::logistic(4.0), &Point::Interval(0.5)).unwrap();
        assert_eq!(y, Point::Interval(1.0));
        let Point::Circle(t) = step(&SystemSpec::rotation(0.25), &Point::Circle(0.9)).unwrap() else { panic!() };
        assert!((t - 0.15).abs() < 1e-12);
        let y = SystemSpec::new(Family::ExpandingTimes { base: 3 }, PhaseSpace::UnitInterval).unwrap();
        let Point::Interval(v) = step(&y, &Point::Interval(0.4)).unwrap() else { panic!() };
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_foreign_points() {
        assert!(matches!(step(&SystemSpec::logistic(4.0), &Point::Circle(0.1)), Err(Error::Input(_))));
    }

    #[test]
    fn golden_rotation_orbit() {
        let spec = SystemSpec::golden_rotation();
        let o = orbit(&spec, &Point::Circle(0.0), &OrbitBudget::new(3, 64)).unwrap();
        let vals: Vec<f64> = o.iter().map(|p| PhaseSpace::coordinates(p)[0]).collect();
        assert_eq!(vals[0], 0.0);
        assert!((vals[1] - 0.6180339887498949).abs() < 1e-15);
        assert!((vals[2] - 0.2360679774997898).abs() < 1e-15);
    }

    #[test]
    fn insufficient_precision_is_refused() {
        let spec = SystemSpec::logistic(4.0);
        let err = orbit(&spec, &Point::Interval(0.3), &OrbitBudget::new(100, 200)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(orbit(&spec, &Point::Interval(0.3), &OrbitBudget::new(100, 264)).is_ok());
    }

    #[test]
    fn logistic_two_fixed_point() {
        let spec = SystemSpec::logistic(2.0);
        let b = OrbitBudget::sufficient(&spec, 30);
        assert!(orbit(&spec, &Point::Interval(0.5), &b).unwrap().iter().all(|p| *p == Point::Interval(0.5)));
    }

    #[test]
    fn quadratic_at_minus_two_mirrors_logistic() {
        // 1 - 4x(1-x) = 1 - logistic_4(x)
        let q = SystemSpec::quadratic(-2.0);
        let l = SystemSpec::logistic(4.0);
        let x = Point::Interval(0.3);
        let a = orbit(&q, &x, &OrbitBudget::sufficient(&q, 2)).unwrap();
        let b = orbit(&l, &x, &OrbitBudget::sufficient(&l, 2)).unwrap();
        let (Point::Interval(a1), Point::Interval(b1)) = (a[1], b[1]) else { panic!() };
        assert!((a1 - (1.0 - b1)).abs() < 1e-15);
    }

    #[test]
    fn block_windows_follow_the_word() {
        let blocks = vec![2, 4, 3, 4];
        let spec = SystemSpec::shift_on_blocks(blocks.clone(), 3);
        let o = orbit(&spec, &Point::Word(0), &OrbitBudget::new(16, 64)).unwrap();
        for (i, p) in o.iter().enumerate() {
            let expect = (0..3).fold(0u64, |acc, k| (acc << 1) | block_symbol(&blocks, (i + k) as u64) as u64);
            assert_eq!(*p, Point::Word(expect), "position {i}");
        }
        // word: 00 0101 000 0101 then zeros
        let word: String = (0..16).map(|i| char::from(b'0' + block_symbol(&blocks, i))).collect();
        assert_eq!(word, "0001010000101000");
    }

    #[test]
    fn ak_with_identity_conjugacy_is_rotation() {
        let spec = ak_map(None, DiffeoSpec::identity(), 0.3).unwrap();
        let y = step(&spec, &Point::Annulus { radius: 0.4, angle: 0.8 }).unwrap();
        let Point::Annulus { radius, angle } = y else { panic!() };
        assert_eq!(radius, 0.4);
        assert!((angle - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spec_json_roundtrip() {
        let specs = vec![
            SystemSpec::logistic(3.7),
            SystemSpec::golden_rotation(),
            SystemSpec::shift_on_blocks(vec![1, 10, 100], 1),
            SystemSpec::bowen(BowenParams::new((1.0, 2.0), (1.0, 2.0), 1.0, 0.0), 0.1),
            ak_map(None, build_bump_diffeo(0.1, 0.9, 0.05, 0.05, 0.9).unwrap(), golden()).unwrap(),
        ];
        for s in specs {
            let text = serde_json::to_string(&s).unwrap();
            let back: SystemSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
        let parsed: SystemSpec =
            serde_json::from_str(r#"{"family": {"type": "logistic", "lambda": 4.0}, "space": {"kind": "unit_interval"}}"#)
                .unwrap();
        assert_eq!(parsed, SystemSpec::logistic(4.0));
    }
}
