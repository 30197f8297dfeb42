//! Experiment runner for the quadratic-activation teacher-student flow.
//!
//! [`run_experiment`] takes a validated [`ExperimentConfig`], writes CSV data
//! and SVG plots into the configured directory and finishes with a
//! `manifest.json`.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;

pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use error::{CliError, Result};

use std::path::PathBuf;

use manifest::{write_manifest, OutputDir, RunClock};

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub lines: Vec<String>,
    pub manifest: PathBuf,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let clock = RunClock::start();
    let mut out = OutputDir::create(&cfg.out)?;
    let mut failed = Vec::new();
    let lines = match cfg.kind()? {
        ExperimentKind::Acceptance => {
            let report = acceptance::run_acceptance(cfg.seed, &mut out)?;
            failed = report.results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
            report.lines()
        }
        _ => experiments::run(cfg, &mut out)?,
    };
    let manifest = clock.finish(cfg, &out)?;
    let path = write_manifest(&out, &manifest)?;
    if !failed.is_empty() {
        return Err(CliError::Acceptance(format!("criteria {} failed\n{}", failed.join(", "), lines.join("\n"))));
    }
    Ok(RunOutcome { lines, manifest: path })
}
