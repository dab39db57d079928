//! Declarative experiment runner behind the `ergolab` binary.
//!
//! A run reads one JSON configuration, validates it in full, executes the
//! experiment and writes a run directory with the config copy, CSV outputs,
//! a versioned `summary.json` and a `manifest.json`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod run;

pub use config::{Experiment, ExperimentConfig, Problem};
pub use error::CliError;
pub use run::{run, validate_bytes, RunManifest};
