//! Experiment catalog and run configuration.
//!
//! A configuration is read from a JSON file and then patched by command-line
//! overrides. Fields that an experiment does not use are ignored by it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FigDensity,
    FigPhiOrtho,
    FigPhiGauss,
    FigRates,
    FigOverlapRates,
    Acceptance,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::FigDensity,
        ExperimentKind::FigPhiOrtho,
        ExperimentKind::FigPhiGauss,
        ExperimentKind::FigRates,
        ExperimentKind::FigOverlapRates,
        ExperimentKind::Acceptance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FigDensity => "fig-density",
            ExperimentKind::FigPhiOrtho => "fig-phi-ortho",
            ExperimentKind::FigPhiGauss => "fig-phi-gauss",
            ExperimentKind::FigRates => "fig-rates",
            ExperimentKind::FigOverlapRates => "fig-overlap-rates",
            ExperimentKind::Acceptance => "acceptance",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::FigDensity => "eigenvalue histogram of Y_d against the limiting density",
            ExperimentKind::FigPhiOrtho => "phi_d(gamma) from orthonormal initializations against the d = inf curve",
            ExperimentKind::FigPhiGauss => "phi_d(gamma) from Gaussian initializations against the orthonormal limit",
            ExperimentKind::FigRates => "loss decay: t^2 L(t) for m > m*, L(t) against e^{-4 mu t} for m = m*",
            ExperimentKind::FigOverlapRates => "delta(gamma) = chi_inf - chi(gamma) with its asymptotic rates",
            ExperimentKind::Acceptance => "full acceptance suite with pass/fail per criterion",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment '{s}' (see `quadflow list`)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    /// Dimensions; empty means the experiment's default list.
    pub d: Vec<usize>,
    pub alpha: Option<f64>,
    pub alpha_star: Option<f64>,
    pub m: Option<usize>,
    pub m_star: Option<usize>,
    pub seed: u64,
    /// Number of consecutive seeds averaged (`seed`, `seed + 1`, ...).
    pub seeds: usize,
    pub eta: f64,
    /// Horizon in flow time (rates) or in `gamma` (phi and overlap curves).
    pub horizon: Option<f64>,
    pub bins: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            d: Vec::new(),
            alpha: None,
            alpha_star: None,
            m: None,
            m_star: None,
            seed: 0,
            seeds: 5,
            eta: 1e-2,
            horizon: None,
            bins: 30,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that replace fields of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub d: Vec<usize>,
    pub alpha: Option<f64>,
    pub alpha_star: Option<f64>,
    pub eta: Option<f64>,
    pub horizon: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(name) = &o.experiment {
            self.experiment = Some(name.parse()?);
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if !o.d.is_empty() {
            self.d = o.d.clone();
        }
        if o.alpha.is_some() {
            self.alpha = o.alpha;
        }
        if o.alpha_star.is_some() {
            self.alpha_star = o.alpha_star;
        }
        if let Some(v) = o.eta {
            self.eta = v;
        }
        if o.horizon.is_some() {
            self.horizon = o.horizon;
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.ok_or_else(|| CliError::Config("no experiment given (config field or --experiment)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta = {} must be positive", self.eta));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("horizon = {h} must be positive"));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("alpha_star", self.alpha_star)] {
            if let Some(v) = v {
                if !(v > 0.0 && v <= 1.0) {
                    return bad(format!("{name} = {v} outside (0, 1]"));
                }
            }
        }
        if self.alpha.is_some() != self.alpha_star.is_some() {
            return bad("alpha and alpha_star must be given together".into());
        }
        if self.m.is_some() != self.m_star.is_some() {
            return bad("m and m_star must be given together".into());
        }
        if self.m == Some(0) || self.m_star == Some(0) {
            return bad("m and m_star must be at least 1".into());
        }
        if self.d.contains(&0) {
            return bad("dimensions must be positive".into());
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.bins == 0 {
            return bad("bins must be at least 1".into());
        }
        if kind == ExperimentKind::FigRates && self.alpha.is_some() {
            return bad("fig-rates takes (m, m_star), not (alpha, alpha_star)".into());
        }
        if let (Some(m), Some(ms)) = (self.m, self.m_star) {
            if let Some(&d) = self.d.iter().find(|&&d| m > d || ms > d) {
                return bad(format!("m = {m}, m_star = {ms} exceed d = {d}"));
            }
        }
        for &d in &self.d {
            for (name, r) in [("alpha", self.alpha), ("alpha_star", self.alpha_star)] {
                if let Some(r) = r {
                    if (r * d as f64).round() < 1.0 {
                        return bad(format!("{name} * d rounds to zero for d = {d}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Ratio pairs to run: the configured one, or the given defaults.
    pub fn ratio_pairs(&self, defaults: &[(f64, f64)]) -> Vec<(f64, f64)> {
        match (self.alpha, self.alpha_star) {
            (Some(a), Some(s)) => vec![(a, s)],
            _ => defaults.to_vec(),
        }
    }

    pub fn dims(&self, defaults: &[usize]) -> Vec<usize> {
        if self.d.is_empty() {
            defaults.to_vec()
        } else {
            self.d.clone()
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }
}

/// Neuron count `round(ratio * d)`.
pub fn neurons(ratio: f64, d: usize) -> usize {
    ((ratio * d as f64).round() as usize).clamp(1, d)
}
