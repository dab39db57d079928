//! CSV and JSON persistence of measures, meta-measures and transport plans.
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! double exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{format_word, parse_word, PhaseSpace, Point};
use crate::transport::{EmpiricalMeasure, MetaMeasure, TransportPlan};

/// Version of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// `%.17g`-style rendering: fixed notation for moderate exponents, trailing
/// zeros dropped, scientific otherwise.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::input(format!("cannot parse number {s:?}")))
}

/// CSV header for a measure on `space`.
pub fn measure_header(space: PhaseSpace) -> Vec<&'static str> {
    let mut h = space.coordinate_names().to_vec();
    h.push("weight");
    h
}

/// Coordinate fields of a point as CSV cells; words as symbol strings.
pub fn point_fields(space: PhaseSpace, p: &Point) -> Vec<String> {
    match (*p, space) {
        (Point::Word(w), PhaseSpace::BinaryShift { depth }) => vec![format_word(w, depth)],
        _ => PhaseSpace::coordinates(p).into_iter().map(format_number).collect(),
    }
}

fn parse_point(space: PhaseSpace, fields: &[&str]) -> Result<Point> {
    let p = match space {
        PhaseSpace::UnitInterval => Point::Interval(parse_number(fields[0])?),
        PhaseSpace::Circle => Point::Circle(parse_number(fields[0])?),
        PhaseSpace::Annulus => Point::Annulus { radius: parse_number(fields[0])?, angle: parse_number(fields[1])? },
        PhaseSpace::BinaryShift { depth } => {
            let f = fields[0].trim();
            if f.len() != depth as usize {
                return Err(Error::input(format!("word {f:?} does not have length {depth}")));
            }
            Point::Word(parse_word(f)?)
        }
    };
    space.check(&p)?;
    Ok(p)
}

pub fn write_measure_csv<W: Write>(mu: &EmpiricalMeasure, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(measure_header(mu.space()))?;
    for a in mu.atoms() {
        let mut row = point_fields(mu.space(), &a.point);
        row.push(format_number(a.weight));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a measure written by [`write_measure_csv`]; the header must match.
pub fn read_measure_csv<R: Read>(space: PhaseSpace, input: R) -> Result<EmpiricalMeasure> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let expected = measure_header(space);
    if header != expected {
        return Err(Error::input(format!("measure CSV header {header:?}, expected {expected:?}")));
    }
    let k = space.coordinate_names().len();
    let mut atoms = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        atoms.push((parse_point(space, &fields[..k])?, parse_number(fields[k])?));
    }
    EmpiricalMeasure::from_atoms(space, atoms)
}

pub fn measure_to_json(mu: &EmpiricalMeasure) -> Result<String> {
    Ok(serde_json::to_string_pretty(mu)?)
}

pub fn measure_from_json(s: &str) -> Result<EmpiricalMeasure> {
    Ok(serde_json::from_str(s)?)
}

/// Plan entries as `i,j,mass` rows.
pub fn write_plan_csv<W: Write>(plan: &TransportPlan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "mass"])?;
    for &(i, j, m) in &plan.entries {
        w.write_record([i.to_string(), j.to_string(), format_number(m)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plan_csv<R: Read>(input: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::input("plan rows need three fields"));
        }
        let idx = |k: usize| rec[k].trim().parse::<usize>().map_err(|_| Error::input(format!("bad index {:?}", &rec[k])));
        out.push((idx(0)?, idx(1)?, parse_number(&rec[2])?));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaIndexEntry {
    pub file: String,
    pub weight: f64,
    pub n_source: u64,
}

/// `index.json` of a meta-measure directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaIndex {
    pub schema_version: u32,
    pub space: PhaseSpace,
    pub atoms: Vec<MetaIndexEntry>,
}

/// Write `index.json` and `atom_00000.csv, ...` into `dir`; returns the
/// written paths.
pub fn write_meta_dir(meta: &MetaMeasure, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(meta.len() + 1);
    let mut entries = Vec::with_capacity(meta.len());
    for (k, (mu, w)) in meta.atoms().iter().enumerate() {
        let name = format!("atom_{k:05}.csv");
        let path = dir.join(&name);
        write_measure_csv(mu, fs::File::create(&path)?)?;
        written.push(path);
        entries.push(MetaIndexEntry { file: name, weight: *w, n_source: mu.n_source() });
    }
    let index = MetaIndex { schema_version: SCHEMA_VERSION, space: meta.space(), atoms: entries };
    let path = dir.join("index.json");
    fs::write(&path, serde_json::to_string_pretty(&index)?)?;
    written.push(path);
    Ok(written)
}

pub fn read_meta_dir(dir: &Path) -> Result<MetaMeasure> {
    let index: MetaIndex = serde_json::from_str(&fs::read_to_string(dir.join("index.json"))?)?;
    if index.schema_version != SCHEMA_VERSION {
        return Err(Error::input(format!("unsupported schema version {}", index.schema_version)));
    }
    let atoms = index
        .atoms
        .iter()
        .map(|e| {
            let mu = read_measure_csv(index.space, fs::File::open(dir.join(&e.file))?)?;
            Ok((mu.with_n_source(e.n_source), e.weight))
        })
        .collect::<Result<Vec<_>>>()?;
    MetaMeasure::weighted(atoms)
}
