use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergolab_cli::{validate_bytes, RunManifest};
use ergolab_core::diagnostics::ReferenceSample;
use ergolab_core::empirics::per_point_measures;
use ergolab_core::io::read_meta_dir;
use ergolab_core::phase_space::Point;
use ergolab_core::systems::{orbit, OrbitBudget, SystemSpec};
use serde_json::Value;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn ergolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab")).args(args).output().expect("binary runs")
}

fn run_config(config: &Path, out: &Path) -> Output {
    ergolab(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn write_config(dir: &Path, name: &str, body: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(body).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sample_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn bowen_config() -> Value {
    serde_json::from_slice(&fs::read(configs_dir().join("bowen.json")).unwrap()).unwrap()
}

#[test]
fn sample_configs_validate_cleanly() {
    let configs = sample_configs();
    assert_eq!(configs.len(), 9, "one sample config per experiment kind");
    for c in configs {
        assert_eq!(validate_bytes(&fs::read(&c).unwrap()), vec![], "{}", c.display());
        let o = ergolab(&["validate", c.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", c.display(), stderr(&o));
    }
}

#[test]
fn golden_headers_and_leading_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for c in sample_configs() {
        let stem = c.file_stem().unwrap().to_str().unwrap().to_string();
        let out = tmp.path().join(&stem);
        let o = run_config(&c, &out);
        assert!(o.status.success(), "{stem}: {}", stderr(&o));
        for entry in fs::read_dir(&out).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_none_or(|e| e != "csv") {
                continue;
            }
            let golden_path = golden_dir().join(format!("{stem}.{}", path.file_name().unwrap().to_str().unwrap()));
            let golden = fs::read_to_string(&golden_path).unwrap_or_else(|_| panic!("missing {}", golden_path.display()));
            let produced = fs::read_to_string(&path).unwrap();
            let k = golden.lines().count();
            let head: Vec<&str> = produced.lines().take(k).collect();
            assert_eq!(head, golden.lines().collect::<Vec<_>>(), "{}", golden_path.display());
            seen += 1;
        }
    }
    assert_eq!(seen, fs::read_dir(golden_dir()).unwrap().count());
}

#[test]
fn manifest_lists_existing_outputs_and_hashes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs_dir().join("delta_rotation.json");
    let out = tmp.path().join("run");
    assert!(run_config(&config, &out).status.success());
    let manifest: RunManifest = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.passed);
    assert_eq!(manifest.artifact, "ergolab");
    for f in &manifest.outputs {
        assert!(out.join(f).is_file(), "{f}");
    }
    let original = fs::read(&config).unwrap();
    assert_eq!(fs::read(out.join("config.json")).unwrap(), original);
    assert_eq!(manifest.config_sha256, ergolab_cli::run::sha256_hex(&original));
    let summary: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["experiment"], "delta");
}

#[test]
fn bowen_summary_has_closed_forms_and_matching_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bowen");
    assert!(run_config(&configs_dir().join("bowen.json"), &out).status.success());
    let s: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let r = &s["results"];
    let get = |k: &str| r[k].as_f64().unwrap();
    assert!((get("limsup_closed_form") - 2.0 / 3.0).abs() <= 1e-15);
    assert!((get("liminf_closed_form") - 1.0 / 3.0).abs() <= 1e-15);
    assert!((get("simulated_sup") - 2.0 / 3.0).abs() <= 0.02);
    assert!((get("simulated_inf") - 1.0 / 3.0).abs() <= 0.02);
    assert_eq!(r["within_tolerance"], true);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["bowen.json", "delta_rotation.json", "meta_gap_logistic.json"] {
        let mut cfg: Value = serde_json::from_slice(&fs::read(configs_dir().join(name)).unwrap()).unwrap();
        let mut bodies = Vec::new();
        for (i, threads) in [1, 1, 3].into_iter().enumerate() {
            cfg["threads"] = threads.into();
            let path = write_config(tmp.path(), &format!("{i}-{name}"), &cfg);
            let out = tmp.path().join(format!("{i}-{name}-run"));
            let o = run_config(&path, &out);
            assert!(o.status.success(), "{}", stderr(&o));
            let mut csvs: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
                .collect();
            csvs.sort();
            assert!(!csvs.is_empty());
            let summary: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
            bodies.push((csvs, summary["results"].clone()));
        }
        assert_eq!(bodies[0], bodies[1], "{name}: same config twice");
        assert_eq!(bodies[0], bodies[2], "{name}: one vs three threads");
    }
}

#[test]
fn n_above_m_exits_2_naming_n() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_slice(&fs::read(configs_dir().join("hk_scan.json")).unwrap()).unwrap();
    cfg["N"] = 600.into();
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let out = tmp.path().join("never");
    let o = run_config(&path, &out);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("N: N = 600 exceeds M = 500"), "{err}");
    assert!(!out.exists(), "nothing is written for invalid configs");
    assert_eq!(ergolab(&["validate", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn out_of_range_lambda_is_one_problem_naming_the_range() {
    let cfg = serde_json::json!({
        "experiment": "orbit", "seed": 1, "n": 10,
        "system": {"family": {"type": "logistic", "lambda": 4.5}, "space": {"kind": "unit_interval"}},
    });
    let problems = validate_bytes(cfg.to_string().as_bytes());
    assert_eq!(problems.len(), 1, "{problems:?}");
    assert_eq!(problems[0].field, "system");
    assert!(problems[0].message.contains("[0,4]"), "{}", problems[0].message);
}

#[test]
fn missing_seed_is_one_problem() {
    let mut cfg = bowen_config();
    cfg.as_object_mut().unwrap().remove("seed");
    let problems = validate_bytes(cfg.to_string().as_bytes());
    assert_eq!(problems.len(), 1, "{problems:?}");
    assert_eq!(problems[0].field, "seed");
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "noseed.json", &cfg);
    let o = ergolab(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed: missing"));
}

#[test]
fn several_problems_are_reported_together() {
    let cfg = serde_json::json!({
        "experiment": "delta", "N": 10, "M": 5, "ratio": 1.0, "sample_size": 0,
        "system_h": {"family": {"type": "rotation", "alpha": 0.1}, "space": {"kind": "circle"}},
        "system_g": {"family": {"type": "logistic", "lambda": 4.0}, "space": {"kind": "unit_interval"}},
    });
    let fields: Vec<String> = validate_bytes(cfg.to_string().as_bytes()).into_iter().map(|p| p.field).collect();
    for f in ["seed", "N", "ratio", "sample_size", "system_g"] {
        assert!(fields.iter().any(|x| x == f), "{f} not in {fields:?}");
    }
}

#[test]
fn insufficient_precision_is_a_validation_problem() {
    let cfg = serde_json::json!({
        "experiment": "orbit", "seed": 1, "n": 200, "precision_bits": 100,
        "system": {"family": {"type": "logistic", "lambda": 4.0}, "space": {"kind": "unit_interval"}},
    });
    let problems = validate_bytes(cfg.to_string().as_bytes());
    assert_eq!(problems.len(), 1);
    assert_eq!(problems[0].field, "precision_bits");
}

#[test]
fn failed_construction_exits_3_with_the_property() {
    // sigma_area leaves no room outside the eps collar
    let cfg = serde_json::json!({
        "experiment": "anosov_katok", "seed": 1, "r1": 0.1, "r2": 0.9, "theta": 0.05, "eps": 0.05,
        "sigma_area": 0.97, "q": 5, "grid_n": 100, "iterates": 100,
    });
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "ak.json", &cfg);
    let o = run_config(&path, &tmp.path().join("ak"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("area of g(B1)"), "{}", stderr(&o));
}

#[test]
fn orbit_csv_round_trips_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("orbit");
    assert!(run_config(&configs_dir().join("orbit_logistic.json"), &out).status.success());
    let spec = SystemSpec::logistic(4.0);
    let want = orbit(&spec, &Point::Interval(0.3), &OrbitBudget::sufficient(&spec, 100)).unwrap();
    let mut r = csv::Reader::from_path(out.join("orbit.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["index", "x"]);
    let mut count = 0;
    for (rec, p) in r.records().zip(&want) {
        let rec = rec.unwrap();
        let Point::Interval(x) = *p else { unreachable!() };
        assert_eq!(rec[1].parse::<f64>().unwrap().to_bits(), x.to_bits());
        count += 1;
    }
    assert_eq!(count, 100);
}

#[test]
fn empirical_sample_mode_writes_a_meta_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "experiment": "empirical", "seed": 4, "n": 50, "sample_size": 6,
        "system": {"family": {"type": "rotation", "alpha": 0.25}, "space": {"kind": "circle"}},
    });
    let path = write_config(tmp.path(), "meta.json", &cfg);
    let out = tmp.path().join("meta-run");
    let o = run_config(&path, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = read_meta_dir(&out.join("meta")).unwrap();
    let spec = SystemSpec::rotation(0.25);
    let sample = ReferenceSample::draw(spec.space, 4, 6).unwrap();
    let direct = per_point_measures(&spec, &sample.points, 50, &OrbitBudget::new(50, 64), None).unwrap();
    assert_eq!(meta.len(), 6);
    for ((mu, w), want) in meta.atoms().iter().zip(&direct) {
        assert_eq!(mu, want);
        assert!((w - 1.0 / 6.0).abs() <= 1e-15);
    }
    let manifest: RunManifest = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.outputs.iter().any(|o| o == "meta/index.json"));
}

#[test]
fn oracle_command_prints_values() {
    let o = ergolab(&["oracle", "gaunersdorfer"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(!text.trim().is_empty());
    for line in text.lines() {
        let value = line.split('\t').nth(2).unwrap();
        assert!(value.parse::<f64>().is_ok(), "{line}");
    }
    assert!(ergolab(&["oracle", "all"]).status.success());
    let bad = ergolab(&["oracle", "no_such_oracle"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("known oracles"));
}
