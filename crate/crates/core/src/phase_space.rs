//! Compact phase spaces, their metrics and reference measures.
//!
//! Four kinds are supported: the unit interval `[0,1]`, the circle `R/Z` with
//! arc-length metric, the annulus `[0,1] x R/Z` with the max of the radial and
//! angular metrics, and the one-sided binary shift truncated at a fixed depth
//! with the ultrametric `d(w, w') = 2^-k`, `k` the first differing index.
//!
//! Reference measures are normalized Lebesgue (product Lebesgue on the annulus)
//! and the uniform cylinder measure on the shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_SHIFT_DEPTH: u32 = 20;
pub const MAX_SHIFT_DEPTH: u32 = 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSpace {
    UnitInterval,
    Circle,
    Annulus,
    BinaryShift {
        #[serde(default = "default_depth")]
        depth: u32,
    },
}

fn default_depth() -> u32 {
    DEFAULT_SHIFT_DEPTH
}

/// A point of one of the phase spaces. Angles live in `[0,1)`; shift words store
/// symbol 0 in the most significant of the `depth` low bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Interval(f64),
    Circle(f64),
    Annulus { radius: f64, angle: f64 },
    Word(u64),
}

/// Reduce an angle to `[0,1)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta - theta.floor();
    // floor of a tiny negative value can round up to exactly 1.0
    if t >= 1.0 || t == 0.0 {
        0.0
    } else {
        t
    }
}

/// Arc-length distance on `R/Z` between two angles in `[0,1)`.
#[inline]
pub fn arc_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

impl Point {
    /// Total order used to sort and merge atoms of a measure.
    pub fn cmp_canonical(&self, other: &Point) -> Ordering {
        self.key().cmp(&other.key())
    }

    /// Order-preserving integer key. Coordinates are non-negative, so IEEE bit
    /// patterns sort like the values they encode.
    pub(crate) fn key(&self) -> (u64, u64) {
        fn bits(x: f64) -> u64 {
            // -0.0 and 0.0 must coincide
            if x == 0.0 {
                0
            } else {
                x.to_bits()
            }
        }
        match *self {
            Point::Interval(x) | Point::Circle(x) => (bits(x), 0),
            Point::Annulus { radius, angle } => (bits(radius), bits(angle)),
            Point::Word(w) => (w, 0),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Point::Interval(_) => "interval",
            Point::Circle(_) => "circle",
            Point::Annulus { .. } => "annulus",
            Point::Word(_) => "word",
        }
    }
}

impl PhaseSpace {
    pub fn validate(&self) -> Result<()> {
        if let PhaseSpace::BinaryShift { depth } = *self {
            if depth == 0 || depth > MAX_SHIFT_DEPTH {
                return Err(Error::input(format!(
                    "binary shift depth {depth} outside 1..={MAX_SHIFT_DEPTH}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhaseSpace::UnitInterval => "unit_interval",
            PhaseSpace::Circle => "circle",
            PhaseSpace::Annulus => "annulus",
            PhaseSpace::BinaryShift { .. } => "binary_shift",
        }
    }

    pub fn shift_depth(&self) -> Option<u32> {
        match *self {
            PhaseSpace::BinaryShift { depth } => Some(depth),
            _ => None,
        }
    }

    fn word_mask(depth: u32) -> u64 {
        if depth >= 64 {
            u64::MAX
        } else {
            (1u64 << depth) - 1
        }
    }

    /// Whether `p` is a point of this space with in-range coordinates.
    pub fn contains(&self, p: &Point) -> bool {
        match (*self, *p) {
            (PhaseSpace::UnitInterval, Point::Interval(x)) => (0.0..=1.0).contains(&x),
            (PhaseSpace::Circle, Point::Circle(t)) => (0.0..1.0).contains(&t),
            (PhaseSpace::Annulus, Point::Annulus { radius, angle }) => {
                (0.0..=1.0).contains(&radius) && (0.0..1.0).contains(&angle)
            }
            (PhaseSpace::BinaryShift { depth }, Point::Word(w)) => w & !Self::word_mask(depth) == 0,
            _ => false,
        }
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "point {p:?} does not belong to space {}",
                self.name()
            )))
        }
    }

    /// Bring coordinates back into range: angles mod 1, radii and interval
    /// points clamped, words masked to the depth.
    pub fn canonicalize(&self, p: Point) -> Result<Point> {
        Ok(match (*self, p) {
            (PhaseSpace::UnitInterval, Point::Interval(x)) => Point::Interval(x.clamp(0.0, 1.0)),
            (PhaseSpace::Circle, Point::Circle(t)) => Point::Circle(wrap_angle(t)),
            (PhaseSpace::Annulus, Point::Annulus { radius, angle }) => Point::Annulus {
                radius: radius.clamp(0.0, 1.0),
                angle: wrap_angle(angle),
            },
            (PhaseSpace::BinaryShift { depth }, Point::Word(w)) => {
                Point::Word(w & Self::word_mask(depth))
            }
            _ => {
                return Err(Error::input(format!(
                    "{} point in {} space",
                    p.kind_name(),
                    self.name()
                )))
            }
        })
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        match (*self, *p, *q) {
            (PhaseSpace::UnitInterval, Point::Interval(a), Point::Interval(b)) => Ok((a - b).abs()),
            (PhaseSpace::Circle, Point::Circle(a), Point::Circle(b)) => Ok(arc_distance(a, b)),
            (
                PhaseSpace::Annulus,
                Point::Annulus { radius: r1, angle: t1 },
                Point::Annulus { radius: r2, angle: t2 },
            ) => Ok((r1 - r2).abs().max(arc_distance(t1, t2))),
            (PhaseSpace::BinaryShift { depth }, Point::Word(a), Point::Word(b)) => {
                Ok(word_distance(a, b, depth))
            }
            _ => Err(Error::input(format!(
                "cannot measure {} and {} points in {} space",
                p.kind_name(),
                q.kind_name(),
                self.name()
            ))),
        }
    }

    /// Distance without kind checks; callers guarantee matching kinds.
    #[inline]
    pub(crate) fn distance_unchecked(&self, p: &Point, q: &Point) -> f64 {
        match (p, q) {
            (Point::Interval(a), Point::Interval(b)) => (a - b).abs(),
            (Point::Circle(a), Point::Circle(b)) => arc_distance(*a, *b),
            (
                Point::Annulus { radius: r1, angle: t1 },
                Point::Annulus { radius: r2, angle: t2 },
            ) => (r1 - r2).abs().max(arc_distance(*t1, *t2)),
            (Point::Word(a), Point::Word(b)) => {
                word_distance(*a, *b, self.shift_depth().unwrap_or(MAX_SHIFT_DEPTH))
            }
            _ => f64::NAN,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            PhaseSpace::UnitInterval => 1.0,
            PhaseSpace::Circle => 0.5,
            PhaseSpace::Annulus => 1.0,
            PhaseSpace::BinaryShift { .. } => 1.0,
        }
    }

    /// `count` i.i.d. draws from the reference measure, deterministic in `seed`.
    pub fn sample_reference(&self, seed: u64, count: usize) -> Result<Vec<Point>> {
        self.validate()?;
        if count == 0 {
            return Err(Error::input("sample count must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..count)
            .map(|_| match *self {
                PhaseSpace::UnitInterval => Point::Interval(rng.random::<f64>()),
                PhaseSpace::Circle => Point::Circle(rng.random::<f64>()),
                PhaseSpace::Annulus => {
                    let radius = rng.random::<f64>();
                    let angle = rng.random::<f64>();
                    Point::Annulus { radius, angle }
                }
                PhaseSpace::BinaryShift { depth } => {
                    Point::Word(rng.random::<u64>() & Self::word_mask(depth))
                }
            })
            .collect();
        Ok(points)
    }

    /// Coordinates as a flat list (words as their integer value).
    pub fn coordinates(p: &Point) -> Vec<f64> {
        match *p {
            Point::Interval(x) | Point::Circle(x) => vec![x],
            Point::Annulus { radius, angle } => vec![radius, angle],
            Point::Word(w) => vec![w as f64],
        }
    }

    /// Column names matching [`PhaseSpace::coordinates`].
    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self {
            PhaseSpace::UnitInterval => &["x"],
            PhaseSpace::Circle => &["theta"],
            PhaseSpace::Annulus => &["r", "theta"],
            PhaseSpace::BinaryShift { .. } => &["word"],
        }
    }

    /// Partition used by coarsening. Every cell has diameter at most `mesh` and
    /// every point lies within `mesh / 2` of its cell's representative.
    pub fn cells(&self, mesh: f64) -> Result<CellGrid> {
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::input(format!("mesh must be positive, got {mesh}")));
        }
        let per_axis = (1.0 / mesh).ceil().max(1.0);
        Ok(match *self {
            PhaseSpace::BinaryShift { depth } => {
                // cylinders of length k have diameter 2^-k
                let k = (2.0 / mesh).log2().ceil().max(0.0) as u32;
                CellGrid::Cylinders { depth, prefix_len: k.min(depth) }
            }
            _ => CellGrid::Uniform { space: *self, per_axis: per_axis as u64 },
        })
    }
}

/// `2^-k` where `k` is the first index at which the two words differ.
#[inline]
pub fn word_distance(a: u64, b: u64, depth: u32) -> f64 {
    let diff = a ^ b;
    if diff == 0 {
        return 0.0;
    }
    let high = 63 - diff.leading_zeros();
    let k = depth as i32 - 1 - high as i32;
    (2.0f64).powi(-k)
}

/// Render a word as a string of symbols, first symbol leftmost.
pub fn format_word(w: u64, depth: u32) -> String {
    (0..depth)
        .map(|i| if (w >> (depth - 1 - i)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_word(s: &str) -> Result<u64> {
    if s.is_empty() || s.len() > MAX_SHIFT_DEPTH as usize {
        return Err(Error::input(format!("bad word length {}", s.len())));
    }
    s.chars().try_fold(0u64, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::input(format!("bad symbol {c:?} in word"))),
    })
}

/// A finite partition of a phase space into cells.
#[derive(Clone, Copy, Debug)]
pub enum CellGrid {
    Uniform { space: PhaseSpace, per_axis: u64 },
    Cylinders { depth: u32, prefix_len: u32 },
}

impl CellGrid {
    pub(crate) fn cell_of(&self, p: &Point) -> (u64, u64) {
        match (*self, *p) {
            (CellGrid::Uniform { per_axis, .. }, Point::Interval(x) | Point::Circle(x)) => {
                (axis_cell(x, per_axis), 0)
            }
            (CellGrid::Uniform { per_axis, .. }, Point::Annulus { radius, angle }) => {
                (axis_cell(radius, per_axis), axis_cell(angle, per_axis))
            }
            (CellGrid::Cylinders { depth, prefix_len }, Point::Word(w)) => {
                (w >> (depth - prefix_len), 0)
            }
            _ => (u64::MAX, u64::MAX),
        }
    }

    pub(crate) fn representative(&self, cell: (u64, u64)) -> Point {
        match *self {
            CellGrid::Uniform { space, per_axis } => {
                let c = |i: u64| (i as f64 + 0.5) / per_axis as f64;
                match space {
                    PhaseSpace::UnitInterval => Point::Interval(c(cell.0)),
                    PhaseSpace::Circle => Point::Circle(c(cell.0)),
                    _ => Point::Annulus { radius: c(cell.0), angle: c(cell.1) },
                }
            }
            CellGrid::Cylinders { depth, prefix_len } => Point::Word(cell.0 << (depth - prefix_len)),
        }
    }

    /// Upper bound on the number of cells.
    pub fn len(&self) -> u64 {
        match *self {
            CellGrid::Uniform { space: PhaseSpace::Annulus, per_axis } => per_axis * per_axis,
            CellGrid::Uniform { per_axis, .. } => per_axis,
            CellGrid::Cylinders { prefix_len, .. } => 1u64 << prefix_len,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[inline]
fn axis_cell(x: f64, per_axis: u64) -> u64 {
    ((x * per_axis as f64) as u64).min(per_axis - 1)
}

impl fmt::Display for PhaseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseSpace::BinaryShift { depth } => write!(f, "binary_shift(depth={depth})"),
            other => f.write_str(other.name()),
        }
    }
}
