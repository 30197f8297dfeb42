//! Figure experiments. Each writes CSV data, SVG plots and returns a few
//! human-readable summary lines.

pub mod density;
pub mod overlap;
pub mod phi;
pub mod rates;

use std::fmt::Write as _;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};
use crate::manifest::OutputDir;

/// The three `(alpha, alpha*)` regimes: `m > m*`, `m = m*`, `m < m*`.
pub const REGIMES: [(f64, f64); 3] = [(0.5, 0.25), (0.5, 0.5), (0.25, 0.5)];

/// File-name fragment for a ratio pair.
pub fn tag(alpha: f64, alphastar: f64) -> String {
    format!("a{alpha:.2}_as{alphastar:.2}")
}

/// CSV with the given header and equally long columns.
pub fn csv_table(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    let n = columns.first().map_or(0, |c| c.len());
    if header.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(CliError::Config("ragged CSV table".into()));
    }
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| format!("{:e}", c[i])).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    Ok(s)
}

/// Runs one figure experiment. The acceptance suite goes through
/// [`crate::acceptance::run_acceptance`].
pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    match cfg.kind()? {
        ExperimentKind::FigDensity => density::run(cfg, out),
        ExperimentKind::FigPhiOrtho => phi::run(cfg, out, phi::Init::Orthonormal),
        ExperimentKind::FigPhiGauss => phi::run(cfg, out, phi::Init::Gaussian),
        ExperimentKind::FigRates => rates::run(cfg, out),
        ExperimentKind::FigOverlapRates => overlap::run(cfg, out),
        ExperimentKind::Acceptance => Err(CliError::Config("acceptance is not a figure experiment".into())),
    }
}
