//! Passage-map model of a planar heteroclinic cycle between two saddles.
//!
//! An orbit entering the linearization box of a saddle at distance `u` from
//! the stable manifold leaves it after `ln(box_h / u) / unstable` time units at
//! distance `box_h * (u / box_h)^(stable / unstable)` from the next
//! connection. Connections are the identity on offsets and take a constant
//! `transit_time`. The state is kept as `ln(u / box_h)` so that offsets far
//! below the smallest double are still tracked exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_box() -> f64 {
    1.0
}

fn default_transit() -> f64 {
    1.0
}

/// Saddle eigenvalues, box size, transit time and observable values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenParams {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    #[serde(default = "default_box")]
    pub box_h: f64,
    #[serde(default = "default_transit")]
    pub transit_time: f64,
    pub g_a: f64,
    pub g_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saddle {
    A,
    B,
}

impl Saddle {
    pub fn other(self) -> Saddle {
        match self {
            Saddle::A => Saddle::B,
            Saddle::B => Saddle::A,
        }
    }
}

impl BowenParams {
    /// Symmetric cycle with the given eigenvalue pairs `(unstable, stable)`.
    pub fn new(alpha: (f64, f64), beta: (f64, f64), g_a: f64, g_b: f64) -> Self {
        BowenParams {
            alpha_plus: alpha.0,
            alpha_minus: alpha.1,
            beta_plus: beta.0,
            beta_minus: beta.1,
            box_h: 1.0,
            transit_time: 1.0,
            g_a,
            g_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha_plus", self.alpha_plus),
            ("alpha_minus", self.alpha_minus),
            ("beta_plus", self.beta_plus),
            ("beta_minus", self.beta_minus),
            ("box_h", self.box_h),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.transit_time >= 0.0 && self.transit_time.is_finite()) {
            return Err(Error::input(format!("transit_time must be nonnegative, got {}", self.transit_time)));
        }
        if !(self.g_a.is_finite() && self.g_b.is_finite()) {
            return Err(Error::input("g_a and g_b must be finite"));
        }
        Ok(())
    }

    /// Modulus of the connection leaving A: `alpha_minus / beta_plus`.
    pub fn lambda(&self) -> f64 {
        self.alpha_minus / self.beta_plus
    }

    /// Modulus of the connection leaving B: `beta_minus / alpha_plus`.
    pub fn sigma(&self) -> f64 {
        self.beta_minus / self.alpha_plus
    }

    /// Closed-form upper limit of the time averages of `g`.
    pub fn limsup(&self) -> f64 {
        let s = self.sigma();
        s / (1.0 + s) * self.g_a + 1.0 / (1.0 + s) * self.g_b
    }

    /// Closed-form lower limit of the time averages of `g`.
    pub fn liminf(&self) -> f64 {
        let l = self.lambda();
        l / (1.0 + l) * self.g_b + 1.0 / (1.0 + l) * self.g_a
    }

    /// `(stable, unstable)` eigenvalues at a saddle.
    fn eigen(&self, saddle: Saddle) -> (f64, f64) {
        match saddle {
            Saddle::A => (self.alpha_minus, self.alpha_plus),
            Saddle::B => (self.beta_minus, self.beta_plus),
        }
    }

    fn value(&self, saddle: Saddle) -> f64 {
        match saddle {
            Saddle::A => self.g_a,
            Saddle::B => self.g_b,
        }
    }

    /// Average of `g` for a time fraction `share_a` spent at A, written so that
    /// `g_a == g_b` gives that value exactly.
    fn blend(&self, share_a: f64) -> f64 {
        self.g_b + (self.g_a - self.g_b) * share_a
    }

    /// Observable value credited to connection segments.
    pub fn transit_value(&self) -> f64 {
        0.5 * (self.g_a + self.g_b)
    }
}

/// One passage through the box of `saddle`, entering at offset `u_in`.
/// Returns `(u_out, sojourn)`.
pub fn saddle_passage(params: &BowenParams, saddle: Saddle, u_in: f64) -> Result<(f64, f64)> {
    params.validate()?;
    if u_in.is_nan() || u_in <= 0.0 {
        return Err(Error::Degenerate(format!(
            "entry offset {u_in} lies on the heteroclinic cycle"
        )));
    }
    if u_in > params.box_h {
        return Err(Error::input(format!("entry offset {u_in} exceeds box size {}", params.box_h)));
    }
    let (log_out, sojourn) = passage_log(params, saddle, (u_in / params.box_h).ln());
    Ok((params.box_h * log_out.exp(), sojourn))
}

/// Passage in log coordinates `l = ln(u / box_h) <= 0`.
#[inline]
fn passage_log(params: &BowenParams, saddle: Saddle, l: f64) -> (f64, f64) {
    let (stable, unstable) = params.eigen(saddle);
    let sojourn = -l / unstable;
    (l * (stable / unstable), sojourn.max(0.0))
}

/// One labelled time interval of the simulated orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub duration: f64,
    /// `None` for a connection between the boxes.
    pub saddle: Option<Saddle>,
}

/// Sojourn summary recorded at the end of each passage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub passage: usize,
    pub saddle: Saddle,
    pub sojourn: f64,
    /// Time at the end of the sojourn.
    pub time: f64,
    /// Time average of `g` over `[0, time]`.
    pub running_average: f64,
}

/// Simulated orbit: alternating sojourns and connections starting at A.
#[derive(Clone, Debug)]
pub struct BowenTrajectory {
    pub params: BowenParams,
    pub segments: Vec<Segment>,
    pub passages: Vec<PassageRecord>,
    /// Cumulative time spent at A and in connections, at each segment start.
    time_at_a: Vec<f64>,
    time_in_transit: Vec<f64>,
}

impl BowenTrajectory {
    /// Simulate `passages` passages, the first through A entering at `u0`.
    pub fn simulate(params: &BowenParams, u0: f64, passages: usize) -> Result<Self> {
        Self::run(params, u0, |traj| traj.passages.len() >= passages)
    }

    /// Simulate until the orbit has covered `[0, horizon]`.
    pub fn until_time(params: &BowenParams, u0: f64, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::input(format!("time horizon must be finite, got {horizon}")));
        }
        Self::run(params, u0, |traj| traj.end_time() >= horizon && !traj.passages.is_empty())
    }

    fn run(params: &BowenParams, u0: f64, done: impl Fn(&Self) -> bool) -> Result<Self> {
        params.validate()?;
        if u0.is_nan() || u0 <= 0.0 {
            return Err(Error::Degenerate(format!("initial offset {u0} lies on the heteroclinic cycle")));
        }
        if u0 >= params.box_h {
            return Err(Error::input(format!("initial offset {u0} must be below box size {}", params.box_h)));
        }
        let mut traj = BowenTrajectory {
            params: params.clone(),
            segments: Vec::new(),
            passages: Vec::new(),
            time_at_a: vec![0.0],
            time_in_transit: vec![0.0],
        };
        let mut l = (u0 / params.box_h).ln();
        let mut saddle = Saddle::A;
        let mut t = 0.0;
        let mut weight_a = 0.0;
        while !done(&traj) {
            if !traj.passages.is_empty() {
                traj.push(Segment { start: t, duration: params.transit_time, saddle: None });
                t += params.transit_time;
                weight_a += 0.5 * params.transit_time;
            }
            let (l_out, sojourn) = passage_log(params, saddle, l);
            if !sojourn.is_finite() {
                return Err(Error::Resource("passage time overflowed".into()));
            }
            traj.push(Segment { start: t, duration: sojourn, saddle: Some(saddle) });
            t += sojourn;
            if saddle == Saddle::A {
                weight_a += sojourn;
            }
            let running_average = if t > 0.0 {
                params.blend(weight_a / t)
            } else {
                params.value(saddle)
            };
            traj.passages.push(PassageRecord {
                passage: traj.passages.len() + 1,
                saddle,
                sojourn,
                time: t,
                running_average,
            });
            l = l_out;
            saddle = saddle.other();
        }
        Ok(traj)
    }

    fn push(&mut self, seg: Segment) {
        let last_a = *self.time_at_a.last().unwrap();
        let last_tr = *self.time_in_transit.last().unwrap();
        self.time_at_a.push(last_a + if seg.saddle == Some(Saddle::A) { seg.duration } else { 0.0 });
        self.time_in_transit.push(last_tr + if seg.saddle.is_none() { seg.duration } else { 0.0 });
        self.segments.push(seg);
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start + s.duration)
    }

    /// `(time at A, time in connections)` over `[0, t]`.
    pub fn occupation(&self, t: f64) -> (f64, f64) {
        let i = self.segments.partition_point(|s| s.start <= t);
        if i == 0 {
            return (0.0, 0.0);
        }
        let seg = self.segments[i - 1];
        let into = (t - seg.start).clamp(0.0, seg.duration);
        let mut a = self.time_at_a[i - 1];
        let mut tr = self.time_in_transit[i - 1];
        match seg.saddle {
            Some(Saddle::A) => a += into,
            None => tr += into,
            Some(Saddle::B) => {}
        }
        (a, tr)
    }

    /// Fraction of `[0, t]` attributed to A, with connections split evenly.
    pub fn mass_at_a(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let (a, tr) = self.occupation(t);
        ((a + 0.5 * tr) / t).clamp(0.0, 1.0)
    }

    /// Time average of `g` over `[0, t]`.
    pub fn average_at(&self, t: f64) -> f64 {
        self.params.blend(self.mass_at_a(t))
    }
}

/// `(time, running average)` at the end of each of `passages` sojourns.
pub fn bowen_running_averages(params: &BowenParams, u0: f64, passages: usize) -> Result<Vec<(f64, f64)>> {
    if passages < 2 {
        return Err(Error::input(format!("need at least two passages, got {passages}")));
    }
    let traj = BowenTrajectory::simulate(params, u0, passages)?;
    Ok(traj.passages.iter().map(|p| (p.time, p.running_average)).collect())
}

/// Largest and smallest running average over passages `first..=last` (1-based).
pub fn running_extremes(records: &[(f64, f64)], first: usize, last: usize) -> Option<(f64, f64)> {
    let lo = first.max(1) - 1;
    let hi = last.min(records.len());
    if lo >= hi {
        return None;
    }
    let window = &records[lo..hi];
    let sup = window.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let inf = window.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Some((sup, inf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classic() -> BowenParams {
        BowenParams::new((1.0, 2.0), (1.0, 2.0), 1.0, 0.0)
    }

    #[test]
    fn passage_examples() {
        let p = classic();
        let (u, s) = saddle_passage(&p, Saddle::A, 1.0).unwrap();
        assert_eq!((u, s), (1.0, 0.0));
        let (_, s) = saddle_passage(&p, Saddle::A, (-5.0f64).exp()).unwrap();
        assert!((s - 5.0).abs() < 1e-12);
        let (u, _) = saddle_passage(&p, Saddle::A, 0.1).unwrap();
        assert!((u - 0.01).abs() < 1e-15);
    }

    #[test]
    fn passage_errors() {
        let p = classic();
        assert!(matches!(saddle_passage(&p, Saddle::B, 0.0), Err(Error::Degenerate(_))));
        assert!(matches!(saddle_passage(&p, Saddle::B, 1.5), Err(Error::Input(_))));
    }

    #[test]
    fn closed_forms() {
        let p = classic();
        assert!((p.limsup() - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.liminf() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn total_time_is_sum_of_parts() {
        let p = classic();
        let traj = BowenTrajectory::simulate(&p, 0.1, 25).unwrap();
        let sojourns: f64 = traj.passages.iter().map(|r| r.sojourn).sum();
        let expected = sojourns + 24.0 * p.transit_time;
        assert_eq!(traj.end_time(), expected);
    }

    #[test]
    fn constant_observable_gives_constant_average() {
        let mut p = classic();
        p.g_a = 0.375;
        p.g_b = 0.375;
        for (_, avg) in bowen_running_averages(&p, 0.3, 40).unwrap() {
            assert_eq!(avg, 0.375);
        }
    }

    #[test]
    fn averages_oscillate_between_limits() {
        let recs = bowen_running_averages(&classic(), 0.1, 60).unwrap();
        let (sup, inf) = running_extremes(&recs, 30, 60).unwrap();
        assert!((sup - 2.0 / 3.0).abs() <= 0.02, "sup {sup}");
        assert!((inf - 1.0 / 3.0).abs() <= 0.02, "inf {inf}");
    }

    #[test]
    fn occupation_matches_running_average() {
        let traj = BowenTrajectory::simulate(&classic(), 0.1, 12).unwrap();
        for rec in &traj.passages {
            let via_mass = traj.mass_at_a(rec.time);
            assert!((via_mass - rec.running_average).abs() < 1e-12);
        }
    }
}
