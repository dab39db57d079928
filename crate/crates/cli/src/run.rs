//! Run directories: config copy, outputs, `summary.json` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use ergolab_core::io::{write_meta_dir, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{self, ExperimentConfig, Problem};
use crate::error::CliError;
use crate::experiments::{execute, Check};

pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub config_file: String,
    pub config_sha256: String,
    pub started_at: String,
    pub finished_at: String,
    /// Paths relative to the run directory; the manifest itself is not listed.
    pub outputs: Vec<String>,
    pub invariants: Vec<Check>,
    pub passed: bool,
}

impl RunManifest {
    pub fn first_failure(&self) -> Option<&Check> {
        self.invariants.iter().find(|c| !c.passed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Problems in a raw configuration; empty iff `run` would start.
pub fn validate_bytes(bytes: &[u8]) -> Vec<Problem> {
    match std::str::from_utf8(bytes) {
        Ok(text) => match config::check(text) {
            Ok(_) => Vec::new(),
            Err(p) => p,
        },
        Err(e) => vec![Problem::new("config", format!("not UTF-8: {e}"))],
    }
}

/// Default run directory: `runs/<experiment>-<first 12 hex digits of the config hash>`.
pub fn default_run_dir(cfg: &ExperimentConfig, hash: &str) -> PathBuf {
    Path::new("runs").join(format!("{}-{}", cfg.experiment.name(), &hash[..12]))
}

/// Validate, execute and persist one run. `out` overrides the configured
/// output directory. Outputs are written even when an invariant fails; the
/// failure is then returned as [`CliError::Invariant`].
pub fn run(config_bytes: &[u8], out: Option<&Path>) -> Result<(PathBuf, RunManifest), CliError> {
    let text = std::str::from_utf8(config_bytes)
        .map_err(|e| CliError::Validation(vec![Problem::new("config", format!("not UTF-8: {e}"))]))?;
    let cfg = config::check(text).map_err(CliError::Validation)?;
    let hash = sha256_hex(config_bytes);
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| default_run_dir(&cfg, &hash));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::io("thread pool", std::io::Error::other(e)))?;
    let started = SystemTime::now();
    let outcome = pool.install(|| execute(&cfg))?;
    let finished = SystemTime::now();

    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path, e))
    };
    let mut outputs = vec![CONFIG_FILE.to_string()];
    write(CONFIG_FILE, config_bytes)?;
    for (name, bytes) in &outcome.files {
        write(name, bytes)?;
        outputs.push(name.clone());
    }
    for (name, meta) in &outcome.metas {
        for path in write_meta_dir(meta, &dir.join(name))? {
            let rel = path.strip_prefix(&dir).unwrap_or(&path);
            outputs.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed(),
        "config_sha256": hash,
        "results": outcome.summary,
    });
    write(SUMMARY_FILE, &serde_json::to_vec_pretty(&summary)?)?;
    outputs.push(SUMMARY_FILE.to_string());

    let mut invariants = outcome.checks;
    invariants.extend(storage_checks(&dir, &outputs, &hash));
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        artifact: "ergolab".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.name().to_string(),
        seed: cfg.seed(),
        threads: pool.current_num_threads(),
        config_file: CONFIG_FILE.to_string(),
        config_sha256: hash,
        started_at: humantime::format_rfc3339_millis(started).to_string(),
        finished_at: humantime::format_rfc3339_millis(finished).to_string(),
        outputs,
        passed: invariants.iter().all(|c| c.passed),
        invariants,
    };
    write(MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?)?;

    if let Some(bad) = manifest.first_failure() {
        return Err(CliError::Invariant { check: bad.name.clone(), record: bad.record.clone(), run_dir: dir });
    }
    Ok((dir, manifest))
}

/// Every listed output exists and the stored config hashes to `hash`.
fn storage_checks(dir: &Path, outputs: &[String], hash: &str) -> Vec<Check> {
    let missing = outputs.iter().find(|o| !dir.join(o).is_file());
    let stored = fs::read(dir.join(CONFIG_FILE)).map(|b| sha256_hex(&b));
    vec![
        match missing {
            None => Check::single("outputs present", true, format!("{} files", outputs.len())),
            Some(m) => Check::single("outputs present", false, format!("missing {m}")),
        },
        match stored {
            Ok(h) if h == hash => Check::single("config hash", true, h),
            Ok(h) => Check::single("config hash", false, format!("stored config hashes to {h}, expected {hash}")),
            Err(e) => Check::single("config hash", false, format!("cannot read stored config: {e}")),
        },
    ]
}
