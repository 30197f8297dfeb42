//! Finite-dimensional `phi_d(gamma)` against the high-dimensional limit.

use rayon::prelude::*;

use quadflow_core::flow::{integrate, integrate_orthonormal, phi_curve, FlowConfig, FlowTrajectory};
use quadflow_core::highdim::ode::DEFAULT_STEP;
use quadflow_core::highdim::{solve_phi, HighDimCurve};
use quadflow_core::model::GramState;
use quadflow_core::sampling::{sample_gaussian_weights, sample_stiefel, RngState};

use crate::config::{neurons, ExperimentConfig};
use crate::error::Result;
use crate::experiments::{csv_table, tag, REGIMES};
use crate::manifest::OutputDir;
use crate::plot::{Axes, LineStyle, Series};

pub const ORTHO_DIMS: [usize; 3] = [100, 200, 400];
pub const GAUSS_DIMS: [usize; 3] = [25, 50, 100];
pub const DEFAULT_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Orthonormal,
    Gaussian,
}

impl Init {
    fn name(self) -> &'static str {
        match self {
            Init::Orthonormal => "ortho",
            Init::Gaussian => "gauss",
        }
    }
}

/// One flow of `gamma_max` rescaled time, recorded every `0.01` in `gamma`
/// when `eta * stride = 0.01 d`. Draws the student, then the teacher.
pub fn single_run(
    init: Init,
    d: usize,
    m: usize,
    mstar: usize,
    seed: u64,
    eta: f64,
    gamma_max: f64,
) -> quadflow_core::Result<FlowTrajectory> {
    let stride = ((0.01 * d as f64 / eta).round() as usize).max(1);
    let cfg = FlowConfig { step_size: eta, horizon: gamma_max, record_stride: stride, rescaled: true };
    let mut rng = RngState::new(seed);
    match init {
        Init::Orthonormal => {
            let u0 = sample_stiefel(d, m, &mut rng)?;
            let us = sample_stiefel(d, mstar, &mut rng)?;
            integrate_orthonormal(&u0, &us, &cfg)
        }
        Init::Gaussian => {
            let w0 = sample_gaussian_weights(d, m, &mut rng)?;
            let teacher = sample_gaussian_weights(d, mstar, &mut rng)?;
            integrate(&w0, &GramState::new(teacher.gram_matrix())?, &cfg)
        }
    }
}

/// Seed-averaged `phi_d` on the recorded `gamma` grid, with each run's final overlap.
pub fn averaged_phi(
    init: Init,
    d: usize,
    ratios: (f64, f64),
    seeds: &[u64],
    eta: f64,
    gamma_max: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (m, mstar) = (neurons(ratios.0, d), neurons(ratios.1, d));
    let runs: Vec<quadflow_core::Result<FlowTrajectory>> =
        seeds.par_iter().map(|&s| single_run(init, d, m, mstar, s, eta, gamma_max)).collect();
    let mut gamma = Vec::new();
    let mut avg: Vec<f64> = Vec::new();
    let mut overlaps = Vec::with_capacity(seeds.len());
    for run in runs {
        let run = run?;
        overlaps.push(run.final_overlap());
        let pc = phi_curve(&run, d);
        if avg.is_empty() {
            avg = vec![0.0; pc.phi.len()];
            gamma = pc.gamma;
        }
        for (a, p) in avg.iter_mut().zip(&pc.phi) {
            *a += p / seeds.len() as f64;
        }
    }
    Ok((gamma, avg, overlaps))
}

/// Largest `|phi_d - phi_inf|` over the grid.
pub fn sup_distance(gamma: &[f64], phi: &[f64], limit: &HighDimCurve) -> f64 {
    gamma.iter().zip(phi).map(|(g, p)| (p - limit.phi_at(*g)).abs()).fold(0.0, f64::max)
}

/// Per-regime result: grid, one averaged column per dimension, the limit.
pub struct PhiPanel {
    pub ratios: (f64, f64),
    pub dims: Vec<usize>,
    pub gamma: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    /// Final overlap of every run, per dimension.
    pub final_overlaps: Vec<Vec<f64>>,
    pub limit: HighDimCurve,
}

impl PhiPanel {
    pub fn compute(
        init: Init,
        ratios: (f64, f64),
        dims: &[usize],
        seeds: &[u64],
        eta: f64,
        gamma_max: f64,
    ) -> Result<Self> {
        let limit = solve_phi(ratios.0, ratios.1, gamma_max, DEFAULT_STEP)?;
        let mut gamma = Vec::new();
        let mut columns = Vec::new();
        let mut final_overlaps = Vec::new();
        for &d in dims {
            let (g, p, ov) = averaged_phi(init, d, ratios, seeds, eta, gamma_max)?;
            final_overlaps.push(ov);
            // All dimensions share the 0.01 grid, so resample onto the first.
            if gamma.is_empty() {
                gamma = g;
                columns.push(p);
            } else {
                columns.push(gamma.iter().map(|&x| quadflow_core::flow::interpolate(&g, &p, x)).collect());
            }
        }
        Ok(Self { ratios, dims: dims.to_vec(), gamma, columns, final_overlaps, limit })
    }

    pub fn sup_distances(&self) -> Vec<f64> {
        self.columns.iter().map(|c| sup_distance(&self.gamma, c, &self.limit)).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let lim: Vec<f64> = self.gamma.iter().map(|&g| self.limit.phi_at(g)).collect();
        let names: Vec<String> = self.dims.iter().map(|d| format!("phi_d{d}")).collect();
        let mut header = vec!["gamma"];
        header.extend(names.iter().map(String::as_str));
        header.push("phi_inf");
        let mut cols: Vec<&[f64]> = vec![&self.gamma];
        cols.extend(self.columns.iter().map(Vec::as_slice));
        cols.push(&lim);
        csv_table(&header, &cols)
    }

    pub fn series(&self) -> Vec<Series> {
        let mut s: Vec<Series> = self
            .dims
            .iter()
            .zip(&self.columns)
            .map(|(d, c)| Series::new(format!("d = {d}"), self.gamma.clone(), c.clone()))
            .collect();
        s.push(Series::new("d = inf", self.limit.gamma.clone(), self.limit.phi.clone()).styled(LineStyle::Dashed));
        s
    }
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir, init: Init) -> Result<Vec<String>> {
    let defaults: &[usize] = match init {
        Init::Orthonormal => &ORTHO_DIMS,
        Init::Gaussian => &GAUSS_DIMS,
    };
    let dims = cfg.dims(defaults);
    let gamma_max = cfg.horizon.unwrap_or(DEFAULT_GAMMA);
    let seeds = cfg.seed_list();
    let mut lines = Vec::new();
    for ratios in cfg.ratio_pairs(&REGIMES) {
        let panel = PhiPanel::compute(init, ratios, &dims, &seeds, cfg.eta, gamma_max)?;
        let name = format!("phi_{}_{}", init.name(), tag(ratios.0, ratios.1));
        out.write(&format!("{name}.csv"), &panel.to_csv()?)?;
        out.write(&format!("limit_{}.csv", tag(ratios.0, ratios.1)), &panel.limit.to_csv())?;
        let title = format!("phi_d(gamma), alpha = {}, alpha* = {}", ratios.0, ratios.1);
        out.plot(&format!("{name}.svg"), &panel.series(), &Axes::new(&title, "gamma", "phi"))?;
        let sups: Vec<String> = panel.sup_distances().iter().map(|v| format!("{v:.4}")).collect();
        lines.push(format!(
            "alpha = {}, alpha* = {}: sup |phi_d - phi_inf| for d = {:?}: [{}]",
            ratios.0,
            ratios.1,
            panel.dims,
            sups.join(", ")
        ));
    }
    Ok(lines)
}
