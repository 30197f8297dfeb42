//! Output directory handling and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::plot::{emit_plot, Axes, Series};

/// Collects the files written by one experiment.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let probe = root.join(".quadflow-write-check");
        fs::write(&probe, b"").map_err(|e| CliError::io(&probe, e))?;
        fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn plot(&mut self, name: &str, series: &[Series], axes: &Axes) -> Result<PathBuf> {
        let svg = emit_plot(series, axes)?;
        self.write(name, &svg)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub params: Value,
    pub started_at: String,
    pub duration_s: f64,
    pub versions: Value,
    pub files: Vec<String>,
}

/// Wall-clock bookkeeping for the manifest.
pub struct RunClock {
    started_at: String,
    start: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        Self { started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true), start: Instant::now() }
    }

    pub fn finish(self, cfg: &ExperimentConfig, out: &OutputDir) -> Result<Manifest> {
        let params = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Manifest {
            experiment: cfg.kind()?.name().to_string(),
            seed: cfg.seed,
            params,
            started_at: self.started_at,
            duration_s: self.start.elapsed().as_secs_f64(),
            versions: serde_json::json!({
                "quadflow": env!("CARGO_PKG_VERSION"),
                "rng": "ChaCha8",
            }),
            files: out.files().to_vec(),
        })
    }
}

pub fn write_manifest(out: &OutputDir, manifest: &Manifest) -> Result<PathBuf> {
    let path = out.root().join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
