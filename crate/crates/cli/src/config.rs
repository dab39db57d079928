//! Experiment configuration: one JSON object per run, tagged by `"experiment"`.

use std::fmt;
use std::path::PathBuf;

use ergolab_core::phase_space::{PhaseSpace, Point};
use ergolab_core::systems::{Family, OrbitBudget, SystemSpec};
use ergolab_core::transport::{DEFAULT_ATOM_CAP, DISCRETE_ATOM_CAP};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A single reason a configuration would not run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Problem {
    pub field: String,
    pub message: String,
}

impl Problem {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Problem { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Mandatory; kept optional here so that its absence is reported as a problem.
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for per-point parallelism. Results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Experiment {
    Orbit(OrbitConfig),
    Empirical(EmpiricalConfig),
    Oscillation(OscillationConfig),
    Delta(DeltaConfig),
    MetaGap(MetaGapConfig),
    BifurcationProbe(ProbeConfig),
    Bowen(BowenConfig),
    AnosovKatok(AkConfig),
    HkScan(HkConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Orbit(_) => "orbit",
            Experiment::Empirical(_) => "empirical",
            Experiment::Oscillation(_) => "oscillation",
            Experiment::Delta(_) => "delta",
            Experiment::MetaGap(_) => "meta_gap",
            Experiment::BifurcationProbe(_) => "bifurcation_probe",
            Experiment::Bowen(_) => "bowen",
            Experiment::AnosovKatok(_) => "anosov_katok",
            Experiment::HkScan(_) => "hk_scan",
        }
    }
}

/// `n` points of the orbit of `x0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub x0: Option<Point>,
    pub n: usize,
    #[serde(default)]
    pub precision_bits: Option<u64>,
}

/// `e_n(x0)`, or the meta-measure over a reference sample when
/// `sample_size` is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub x0: Option<Point>,
    pub n: usize,
    #[serde(default)]
    pub mesh: Option<f64>,
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub precision_bits: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub x0: Option<Point>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub precision_bits: Option<u64>,
}

/// Both divergence estimators between `system_h` and `system_g`, plus the
/// `Δᵉ` curve over `n_list`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaConfig {
    pub system_h: SystemSpec,
    pub system_g: SystemSpec,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    /// Flagging threshold, used when both systems coincide.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub precision_bits: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaGapConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub sample_size: Option<usize>,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub mesh: Option<f64>,
    #[serde(default)]
    pub precision_bits: Option<u64>,
}

/// Rotations by `1/k` observed for `floor(arc * k)` steps, against the
/// meta-measure of uniform arcs of length `arc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub k_list: Vec<u64>,
    pub arc: f64,
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BowenConfig {
    /// `[unstable, stable]` eigenvalue moduli at A.
    pub alpha: [f64; 2],
    /// `[unstable, stable]` eigenvalue moduli at B.
    pub beta: [f64; 2],
    pub g_a: f64,
    pub g_b: f64,
    pub u0: f64,
    pub passages: usize,
    /// 1-based inclusive passage range for the simulated sup/inf.
    #[serde(default)]
    pub window: Option<[usize; 2]>,
    #[serde(default)]
    pub box_h: Option<f64>,
    #[serde(default)]
    pub transit_time: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AkConfig {
    pub r1: f64,
    pub r2: f64,
    pub theta: f64,
    pub eps: f64,
    pub sigma_area: f64,
    pub q: u64,
    #[serde(default)]
    pub alpha_prime: Option<f64>,
    #[serde(default)]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub commutation_grid: Option<usize>,
    #[serde(default)]
    pub iterates: Option<usize>,
    #[serde(default)]
    pub x0: Option<Point>,
    #[serde(default)]
    pub occupancy_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HkConfig {
    pub lambdas: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub sample_size: Option<usize>,
}

pub const DEFAULT_GRID_N: usize = 1000;
pub const DEFAULT_COMMUTATION_GRID: usize = 200;
pub const DEFAULT_AK_ITERATES: usize = 100_000;
pub const DEFAULT_OCCUPANCY_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_ARC_RESOLUTION: usize = 1024;
pub const DEFAULT_BOWEN_TOLERANCE: f64 = 0.02;

const COMMON_FIELDS: [&str; 3] = ["seed", "output_dir", "threads"];

impl ExperimentConfig {
    /// Parse a configuration. Structural errors (bad JSON, unknown kinds or
    /// fields, wrong types) come back as problems.
    pub fn parse(text: &str) -> Result<Self, Vec<Problem>> {
        let value: Value = serde_json::from_str(text).map_err(|e| vec![Problem::new("config", e.to_string())])?;
        let Value::Object(mut map) = value else {
            return Err(vec![Problem::new("config", "expected a JSON object")]);
        };
        let mut problems = Vec::new();
        let mut common = Map::new();
        for key in COMMON_FIELDS {
            if let Some(v) = map.remove(key) {
                common.insert(key.to_string(), v);
            }
        }
        let seed = take::<u64>(&common, "seed", &mut problems);
        let output_dir = take::<PathBuf>(&common, "output_dir", &mut problems);
        let threads = take::<usize>(&common, "threads", &mut problems);
        if !map.contains_key("experiment") {
            problems.push(Problem::new("experiment", "missing experiment kind"));
            return Err(problems);
        }
        let experiment = match Experiment::deserialize(Value::Object(map)) {
            Ok(e) => Some(e),
            Err(e) => {
                let msg = e.to_string();
                let field = field_in_message(&msg).unwrap_or("experiment").to_string();
                problems.push(Problem::new(field, msg));
                None
            }
        };
        match experiment {
            Some(experiment) if problems.is_empty() => Ok(ExperimentConfig { seed, output_dir, threads, experiment }),
            _ => Err(problems),
        }
    }

    /// Every problem that would stop the run; empty iff it would start.
    pub fn validate(&self) -> Vec<Problem> {
        let mut p = Vec::new();
        if self.seed.is_none() {
            p.push(Problem::new("seed", "missing; seeds are mandatory"));
        }
        if self.threads == Some(0) {
            p.push(Problem::new("threads", "must be at least 1"));
        }
        match &self.experiment {
            Experiment::Orbit(c) => {
                if system_ok(&mut p, "system", &c.system) {
                    if matches!(c.system.family, Family::BowenSurrogate { .. }) {
                        p.push(Problem::new("system", "the heteroclinic surrogate has no discrete orbit; use the bowen experiment"));
                    } else {
                        start_point(&mut p, "x0", &c.system, c.x0.as_ref());
                        positive(&mut p, "n", c.n);
                        precision(&mut p, &[&c.system], c.n, c.precision_bits);
                    }
                }
            }
            Experiment::Empirical(c) => {
                if system_ok(&mut p, "system", &c.system) {
                    start_point(&mut p, "x0", &c.system, c.x0.as_ref());
                    positive(&mut p, "n", c.n);
                    mesh(&mut p, c.mesh);
                    if let Some(s) = c.sample_size {
                        sample_size(&mut p, s, false);
                    }
                    precision(&mut p, &[&c.system], c.n, c.precision_bits);
                }
            }
            Experiment::Oscillation(c) => {
                if system_ok(&mut p, "system", &c.system) {
                    start_point(&mut p, "x0", &c.system, c.x0.as_ref());
                    horizons(&mut p, c.n, c.m);
                    ratio(&mut p, c.ratio);
                    threshold(&mut p, c.threshold);
                    annulus_cap(&mut p, "M", &c.system, c.m, false);
                    precision(&mut p, &[&c.system], c.m, c.precision_bits);
                }
            }
            Experiment::Delta(c) => {
                let h = system_ok(&mut p, "system_h", &c.system_h);
                let g = system_ok(&mut p, "system_g", &c.system_g);
                horizons(&mut p, c.n, c.m);
                ratio(&mut p, c.ratio);
                threshold(&mut p, c.threshold);
                sample_size(&mut p, c.sample_size.unwrap_or(ergolab_core::diagnostics::DEFAULT_SAMPLE_SIZE), false);
                if let Some(list) = &c.n_list {
                    n_list(&mut p, list, Some(c.m));
                }
                if h && g {
                    if c.system_h.space != c.system_g.space {
                        p.push(Problem::new("system_g", "must act on the same space as system_h"));
                    } else {
                        annulus_cap(&mut p, "M", &c.system_h, c.m, false);
                        precision(&mut p, &[&c.system_h, &c.system_g], c.m, c.precision_bits);
                    }
                }
            }
            Experiment::MetaGap(c) => {
                if system_ok(&mut p, "system", &c.system) {
                    sample_size(&mut p, c.sample_size.unwrap_or(ergolab_core::diagnostics::DEFAULT_SAMPLE_SIZE), true);
                    mesh(&mut p, c.mesh);
                    if n_list(&mut p, &c.n_list, None) {
                        let top = c.n_list.iter().max().copied().unwrap_or(1) + 1;
                        annulus_cap(&mut p, "mesh", &c.system, top, c.mesh.is_some());
                        precision(&mut p, &[&c.system], top, c.precision_bits);
                    }
                }
            }
            Experiment::BifurcationProbe(c) => {
                if c.k_list.is_empty() {
                    p.push(Problem::new("k_list", "must not be empty"));
                }
                if c.k_list.contains(&0) {
                    p.push(Problem::new("k_list", "entries must be positive"));
                }
                if !(c.arc > 0.0 && c.arc <= 1.0) {
                    p.push(Problem::new("arc", format!("{} outside (0,1]", c.arc)));
                }
                sample_size(&mut p, c.sample_size.unwrap_or(ergolab_core::diagnostics::DEFAULT_SAMPLE_SIZE), true);
                if c.resolution == Some(0) {
                    p.push(Problem::new("resolution", "must be positive"));
                }
            }
            Experiment::Bowen(c) => {
                match SystemSpec::new(
                    Family::BowenSurrogate { params: c.params(), u0: c.u0 },
                    PhaseSpace::BinaryShift { depth: 1 },
                ) {
                    Ok(_) => {}
                    Err(e) => p.push(Problem::new(bowen_field(&e.to_string()), e.to_string())),
                }
                if c.passages < 2 {
                    p.push(Problem::new("passages", "need at least two passages"));
                }
                if let Some([first, last]) = c.window {
                    if first == 0 || first > last || last > c.passages {
                        p.push(Problem::new("window", format!("[{first}, {last}] is not a range inside 1..={}", c.passages)));
                    }
                }
                if let Some(t) = c.tolerance {
                    if t <= 0.0 || t.is_nan() {
                        p.push(Problem::new("tolerance", "must be positive"));
                    }
                }
            }
            Experiment::AnosovKatok(c) => {
                if !(0.0 < c.r1 && c.r1 < c.r2 && c.r2 < 1.0) {
                    p.push(Problem::new("r1", format!("need 0 < r1 < r2 < 1, got r1 = {}, r2 = {}", c.r1, c.r2)));
                }
                if !(c.theta > 0.0 && c.theta < 1.0) {
                    p.push(Problem::new("theta", format!("{} outside (0,1)", c.theta)));
                }
                if !(c.eps > 0.0 && c.eps < c.r1) {
                    p.push(Problem::new("eps", format!("need 0 < eps < r1, got {}", c.eps)));
                }
                if !(c.sigma_area > 0.0 && c.sigma_area < 1.0) {
                    p.push(Problem::new("sigma_area", format!("{} outside (0,1)", c.sigma_area)));
                }
                positive(&mut p, "q", c.q as usize);
                if let Some(a) = c.alpha_prime {
                    if !(a > 0.0 && a < 1.0) {
                        p.push(Problem::new("alpha_prime", format!("{a} outside (0,1)")));
                    }
                }
                if c.grid_n.is_some_and(|g| g < 100) {
                    p.push(Problem::new("grid_n", "must be at least 100"));
                }
                if c.commutation_grid == Some(0) {
                    p.push(Problem::new("commutation_grid", "must be positive"));
                }
                if c.iterates == Some(0) {
                    p.push(Problem::new("iterates", "must be positive"));
                }
                if let Some(x) = &c.x0 {
                    if let Err(e) = PhaseSpace::Annulus.check(x) {
                        p.push(Problem::new("x0", e.to_string()));
                    }
                }
            }
            Experiment::HkScan(c) => {
                if c.lambdas.is_empty() {
                    p.push(Problem::new("lambdas", "must not be empty"));
                }
                for (i, l) in c.lambdas.iter().enumerate() {
                    if !(0.0..=4.0).contains(l) {
                        p.push(Problem::new(format!("lambdas[{i}]"), format!("logistic lambda {l} outside [0,4]")));
                    }
                }
                horizons(&mut p, c.n, c.m);
                sample_size(&mut p, c.sample_size.unwrap_or(ergolab_core::diagnostics::DEFAULT_SAMPLE_SIZE), false);
            }
        }
        p
    }

    /// The seed of a validated configuration.
    pub fn seed(&self) -> u64 {
        self.seed.expect("validated configurations carry a seed")
    }
}

impl BowenConfig {
    pub fn params(&self) -> ergolab_core::systems::BowenParams {
        let mut p = ergolab_core::systems::BowenParams::new(
            (self.alpha[0], self.alpha[1]),
            (self.beta[0], self.beta[1]),
            self.g_a,
            self.g_b,
        );
        if let Some(h) = self.box_h {
            p.box_h = h;
        }
        if let Some(t) = self.transit_time {
            p.transit_time = t;
        }
        p
    }
}

/// Parse then validate.
pub fn check(text: &str) -> Result<ExperimentConfig, Vec<Problem>> {
    let cfg = ExperimentConfig::parse(text)?;
    let problems = cfg.validate();
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(problems)
    }
}

/// Budget for `specs` over `iterations`: the explicit precision if given,
/// the smallest sufficient one otherwise.
pub fn budget(specs: &[&SystemSpec], iterations: usize, precision_bits: Option<u64>) -> OrbitBudget {
    match precision_bits {
        Some(bits) => OrbitBudget::new(iterations, bits),
        None => ergolab_core::diagnostics::covering_budget(specs, iterations),
    }
}

fn take<T: serde::de::DeserializeOwned>(map: &Map<String, Value>, key: &str, problems: &mut Vec<Problem>) -> Option<T> {
    let v = map.get(key)?;
    if v.is_null() {
        return None;
    }
    match serde_json::from_value(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            problems.push(Problem::new(key, e.to_string()));
            None
        }
    }
}

/// First backquoted name in a serde message, e.g. "missing field `N`".
fn field_in_message(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    let name = &msg[start..start + len];
    (msg.starts_with("missing field") || msg.starts_with("unknown field")).then_some(name)
}

fn bowen_field(msg: &str) -> &'static str {
    const NAMES: [(&str, &str); 8] = [
        ("alpha_", "alpha"),
        ("beta_", "beta"),
        ("box_h", "box_h"),
        ("transit_time", "transit_time"),
        ("g_a", "g_a"),
        ("u0", "u0"),
        ("degenerate", "alpha"),
        ("lambda", "alpha"),
    ];
    NAMES.iter().find(|(k, _)| msg.contains(k)).map_or("bowen", |(_, f)| f)
}

fn system_ok(p: &mut Vec<Problem>, field: &str, spec: &SystemSpec) -> bool {
    match spec.validate() {
        Ok(()) => true,
        Err(e) => {
            p.push(Problem::new(field, e.to_string()));
            false
        }
    }
}

fn start_point(p: &mut Vec<Problem>, field: &str, spec: &SystemSpec, x0: Option<&Point>) {
    if let Some(x) = x0 {
        if let Err(e) = spec.space.check(x) {
            p.push(Problem::new(field, e.to_string()));
        }
    }
}

fn positive(p: &mut Vec<Problem>, field: &str, v: usize) {
    if v == 0 {
        p.push(Problem::new(field, "must be at least 1"));
    }
}

fn horizons(p: &mut Vec<Problem>, n: usize, m: usize) {
    if n == 0 {
        p.push(Problem::new("N", "must be at least 1"));
    } else if n > m {
        p.push(Problem::new("N", format!("N = {n} exceeds M = {m}")));
    }
}

fn ratio(p: &mut Vec<Problem>, r: Option<f64>) {
    if let Some(r) = r {
        if !(r > 1.0 && r.is_finite()) {
            p.push(Problem::new("ratio", format!("schedule ratio {r} must exceed 1")));
        }
    }
}

fn threshold(p: &mut Vec<Problem>, t: Option<f64>) {
    if let Some(t) = t {
        if !(t >= 0.0 && t.is_finite()) {
            p.push(Problem::new("threshold", format!("{t} must be nonnegative")));
        }
    }
}

fn mesh(p: &mut Vec<Problem>, mesh: Option<f64>) {
    if let Some(h) = mesh {
        if !(h > 0.0 && h.is_finite()) {
            p.push(Problem::new("mesh", format!("{h} must be positive")));
        }
    }
}

fn sample_size(p: &mut Vec<Problem>, s: usize, lifted: bool) {
    if s == 0 {
        p.push(Problem::new("sample_size", "must be at least 1"));
    } else if lifted && s > DEFAULT_ATOM_CAP {
        p.push(Problem::new("sample_size", format!("{s} exceeds the lifted transport cap {DEFAULT_ATOM_CAP}")));
    }
}

fn n_list(p: &mut Vec<Problem>, list: &[usize], m: Option<usize>) -> bool {
    let before = p.len();
    if list.is_empty() {
        p.push(Problem::new("n_list", "must not be empty"));
    } else if list.contains(&0) {
        p.push(Problem::new("n_list", "entries must be positive"));
    } else if list.windows(2).any(|w| w[1] <= w[0]) {
        p.push(Problem::new("n_list", "must be strictly increasing"));
    } else if let Some(m) = m {
        if let Some(n) = list.iter().find(|&&n| n > m) {
            p.push(Problem::new("n_list", format!("entry {n} exceeds M = {m}")));
        }
    }
    p.len() == before
}

/// Annulus measures go through the discrete solver, which has an atom cap.
fn annulus_cap(p: &mut Vec<Problem>, field: &str, spec: &SystemSpec, horizon: usize, meshed: bool) {
    if spec.space == PhaseSpace::Annulus && !meshed && horizon > DISCRETE_ATOM_CAP {
        p.push(Problem::new(
            field,
            format!("annulus measures above {DISCRETE_ATOM_CAP} atoms exceed the discrete solver cap; horizon is {horizon}"),
        ));
    }
}

fn precision(p: &mut Vec<Problem>, specs: &[&SystemSpec], iterations: usize, bits: Option<u64>) {
    let Some(bits) = bits else { return };
    for spec in specs {
        if let Err(e) = spec.check_budget(&OrbitBudget::new(iterations.max(1), bits)) {
            p.push(Problem::new("precision_bits", e.to_string()));
            return;
        }
    }
}
