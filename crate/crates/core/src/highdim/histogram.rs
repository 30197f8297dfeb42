//! Binned comparison of empirical eigenvalues with the limiting measure.

use crate::error::{Error, Result};
use crate::highdim::density::SpectralDensity;

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    /// `bins + 1` equally spaced edges on `[0, 1]`.
    pub edges: Vec<f64>,
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
    pub discrepancy: Vec<f64>,
    pub sup: f64,
}

impl HistogramReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,empirical,analytic,discrepancy\n");
        for i in 0..self.empirical.len() {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                self.edges[i],
                self.edges[i + 1],
                self.empirical[i],
                self.analytic[i],
                self.discrepancy[i]
            ));
        }
        s
    }
}

/// Per-bin masses of `eigs` against the measure (atoms fall in the end bins).
pub fn density_histogram_compare(eigs: &[f64], density: &SpectralDensity, bins: usize) -> Result<HistogramReport> {
    if eigs.is_empty() {
        return Err(Error::EmptyInput("eigenvalue list"));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    if let Some(bad) = eigs.iter().find(|v| !(**v >= -1e-9 && **v <= 1.0 + 1e-9)) {
        return Err(Error::InvalidParameter(format!("eigenvalue {bad} outside [0, 1]")));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in eigs {
        let k = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = eigs.len() as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mut analytic: Vec<f64> = (0..bins).map(|i| density.bulk_mass_between(edges[i], edges[i + 1])).collect();
    analytic[0] += density.atom0;
    analytic[bins - 1] += density.atom1;
    let discrepancy: Vec<f64> = empirical.iter().zip(&analytic).map(|(e, a)| (e - a).abs()).collect();
    let sup = discrepancy.iter().cloned().fold(0.0, f64::max);
    Ok(HistogramReport { edges, empirical, analytic, discrepancy, sup })
}
