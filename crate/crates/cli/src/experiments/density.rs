//! Eigenvalues of `Y_d = U0^T U* U*^T U0` against the limiting measure.

use rayon::prelude::*;

use quadflow_core::highdim::{density_histogram_compare, manova_density, HistogramReport, SpectralDensity};
use quadflow_core::sampling::{projection_product_spectrum, sample_stiefel, RngState};

use crate::config::{neurons, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::experiments::csv_table;
use crate::manifest::OutputDir;
use crate::plot::{Axes, LineStyle, Series};

pub const DEFAULT_D: usize = 2000;
pub const DEFAULT_RATIOS: (f64, f64) = (0.3, 0.5);

/// Spectra of `Y_d` for each seed, concatenated in seed order.
pub fn pooled_spectrum(d: usize, m: usize, mstar: usize, seeds: &[u64]) -> Result<Vec<f64>> {
    let per_seed: Vec<quadflow_core::Result<Vec<f64>>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = RngState::new(seed);
            let u0 = sample_stiefel(d, m, &mut rng)?;
            let us = sample_stiefel(d, mstar, &mut rng)?;
            projection_product_spectrum(&u0, &us)
        })
        .collect();
    let mut all = Vec::with_capacity(seeds.len() * m);
    for s in per_seed {
        all.extend(s?);
    }
    Ok(all)
}

/// Sampled `x, w(x)` on the bulk.
pub fn density_curve(density: &SpectralDensity, points: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (density.r_minus, density.r_plus);
    let xs: Vec<f64> = (1..points).map(|i| a + (b - a) * i as f64 / points as f64).collect();
    let ws = xs.iter().map(|&x| density.bulk_density(x)).collect();
    (xs, ws)
}

/// JSON sidecar describing the atoms and edges of a density export.
pub fn density_header(density: &SpectralDensity) -> String {
    let v = serde_json::json!({
        "alpha": density.alpha,
        "alpha_star": density.alphastar,
        "r_minus": density.r_minus,
        "r_plus": density.r_plus,
        "atom0": density.atom0,
        "atom1": density.atom1,
    });
    serde_json::to_string_pretty(&v).unwrap_or_default() + "\n"
}

pub fn write_density_outputs(
    out: &mut OutputDir,
    prefix: &str,
    density: &SpectralDensity,
    report: &HistogramReport,
) -> Result<()> {
    out.write(&format!("{prefix}_histogram.csv"), &report.to_csv())?;
    let (xs, ws) = density_curve(density, 400);
    out.write(&format!("{prefix}_curve.csv"), &csv_table(&["x", "w"], &[&xs, &ws])?)?;
    out.write(&format!("{prefix}_curve.json"), &density_header(density))?;

    let width = 1.0 / report.empirical.len() as f64;
    let heights: Vec<f64> = report.empirical.iter().map(|p| p / width).collect();
    let series = vec![
        Series::steps("empirical", &report.edges, &heights),
        Series::new("limit density", xs, ws).styled(LineStyle::Dashed),
    ];
    let title = format!("Eigenvalues of Y_d, alpha = {}, alpha* = {}", density.alpha, density.alphastar);
    out.plot(&format!("{prefix}.svg"), &series, &Axes::new(&title, "x", "density"))?;
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let (alpha, alphastar) = cfg.ratio_pairs(&[DEFAULT_RATIOS])[0];
    let dims = cfg.dims(&[DEFAULT_D]);
    let mut lines = Vec::new();
    for d in dims {
        let (m, mstar) = match (cfg.m, cfg.m_star) {
            (Some(m), Some(ms)) => (m, ms),
            _ => (neurons(alpha, d), neurons(alphastar, d)),
        };
        let density = manova_density(m as f64 / d as f64, mstar as f64 / d as f64)?;
        let eigs = pooled_spectrum(d, m, mstar, &cfg.seed_list())?;
        let report = density_histogram_compare(&eigs, &density, cfg.bins)?;
        let prefix = format!("density_d{d}");
        write_density_outputs(out, &prefix, &density, &report)?;
        lines.push(format!(
            "d = {d}, m = {m}, m* = {mstar}: {} eigenvalues, sup bin discrepancy {:.4}",
            eigs.len(),
            report.sup
        ));
    }
    if lines.is_empty() {
        return Err(CliError::Config("no dimensions to run".into()));
    }
    Ok(lines)
}
