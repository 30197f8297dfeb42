//! The `(F, J)` system whose solution gives `phi(gamma)` in the limit
//! `d -> infinity` with `m = alpha d`, `m* = alpha* d`:
//!
//! ```text
//! (F', J') = 4 / (alpha + Gamma(J) (E - J)) * (F, E - J),   E = e^{4 gamma / alpha*}
//! Gamma(J) = (alpha + alpha* - 1)^+ / J + Theta'(J - 1),      F(0) = J(0) = 1
//! phi = -1/2 log(alpha F' / 4)
//! ```
//!
//! `F` and `G = J F` are carried as logarithms.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow::interpolate;
use crate::highdim::density::{manova_density, BulkQuadrature, SpectralDensity};
use crate::highdim::overlap::overlap_at;

/// Step used by the reference discretization.
pub const DEFAULT_STEP: f64 = 2e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeScheme {
    Euler,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub step: f64,
    pub scheme: OdeScheme,
    /// Spacing of the recorded grid in `gamma`.
    pub record_every: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { step: DEFAULT_STEP, scheme: OdeScheme::Euler, record_every: 0.01 }
    }
}

/// Sampled solution on a uniform `gamma` grid.
#[derive(Debug, Clone)]
pub struct HighDimCurve {
    pub alpha: f64,
    pub alphastar: f64,
    pub gamma: Vec<f64>,
    pub log_f: Vec<f64>,
    pub log_g: Vec<f64>,
    pub phi: Vec<f64>,
    pub chi: Vec<f64>,
    /// `chi_inf - chi`, computed without cancellation.
    pub delta: Vec<f64>,
    /// `4 gamma - alpha log F - (alpha + alpha* - 1)^+ log J - Theta(J - 1)`.
    pub residual: Vec<f64>,
}

impl HighDimCurve {
    pub fn log_j(&self) -> Vec<f64> {
        self.log_g.iter().zip(&self.log_f).map(|(g, f)| g - f).collect()
    }

    pub fn f(&self) -> Vec<f64> {
        self.log_f.iter().map(|v| v.exp()).collect()
    }

    pub fn g(&self) -> Vec<f64> {
        self.log_g.iter().map(|v| v.exp()).collect()
    }

    pub fn j(&self) -> Vec<f64> {
        self.log_j().iter().map(|v| v.exp()).collect()
    }

    pub fn phi_at(&self, gamma: f64) -> f64 {
        interpolate(&self.gamma, &self.phi, gamma)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// CSV with header `gamma,F,G,J,phi,chi,residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,F,G,J,phi,chi,residual\n");
        let (f, g, j) = (self.f(), self.g(), self.j());
        for i in 0..self.gamma.len() {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.gamma[i], f[i], g[i], j[i], self.phi[i], self.chi[i], self.residual[i]
            );
        }
        s
    }
}

struct Rhs<'a> {
    density: &'a SpectralDensity,
}

impl Rhs<'_> {
    /// `(d log F, d log G, denominator)` at `(gamma, log F, log G)`.
    fn eval(&self, gamma: f64, log_f: f64, log_g: f64) -> Result<(f64, f64, f64)> {
        let d = self.density;
        let log_e = 4.0 * gamma / d.alphastar;
        let log_j = log_g - log_f;
        if !log_j.is_finite() {
            return Err(Error::NonFinite(format!("log J at gamma = {gamma}")));
        }
        // E - J = -E expm1(log J - log E); positive on the solution.
        let gap = -(log_e.exp()) * (log_j - log_e).exp_m1();
        let gamma_fn = d.excess() * (-log_j).exp() + d.theta_prime(log_j.exp_m1())?;
        let den = d.alpha + gamma_fn * gap;
        if !(den > 0.0) {
            return Err(Error::OutOfScope(format!(
                "denominator alpha + Gamma(J)(E - J) = {den:e} <= 0 at gamma = {gamma}"
            )));
        }
        let dlog_f = 4.0 / den;
        Ok((dlog_f, dlog_f * (log_e - log_j).exp(), den))
    }
}

/// Solves the system with explicit Euler at the given step, recording every 0.01.
pub fn solve_phi(alpha: f64, alphastar: f64, gamma_max: f64, step: f64) -> Result<HighDimCurve> {
    solve_phi_with(alpha, alphastar, gamma_max, &SolveOptions { step, ..SolveOptions::default() })
}

pub fn solve_phi_with(alpha: f64, alphastar: f64, gamma_max: f64, opts: &SolveOptions) -> Result<HighDimCurve> {
    if !(opts.step > 0.0) || !(gamma_max >= 0.0) || !(opts.record_every > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need step > 0, gamma_max >= 0, record spacing > 0 (got {}, {gamma_max}, {})",
            opts.step, opts.record_every
        )));
    }
    let density = manova_density(alpha, alphastar)?;
    let quad = density.quadrature();
    let rhs = Rhs { density: &density };
    let steps = (gamma_max / opts.step).round() as usize;
    let stride = ((opts.record_every / opts.step).round() as usize).max(1);

    let mut curve = HighDimCurve {
        alpha,
        alphastar,
        gamma: Vec::new(),
        log_f: Vec::new(),
        log_g: Vec::new(),
        phi: Vec::new(),
        chi: Vec::new(),
        delta: Vec::new(),
        residual: Vec::new(),
    };
    let (mut lf, mut lg) = (0.0f64, 0.0f64);
    for n in 0..=steps {
        let gamma = n as f64 * opts.step;
        let (df, dg, den) = rhs.eval(gamma, lf, lg)?;
        if n % stride == 0 || n == steps {
            let log_j = lg - lf;
            let theta = quad.theta(log_j.exp_m1())?;
            let point = overlap_at(&density, &quad, gamma, log_j);
            curve.gamma.push(gamma);
            curve.log_f.push(lf);
            curve.log_g.push(lg);
            curve.phi.push(0.5 * (den.ln() - alpha.ln() - lf));
            curve.chi.push(point.chi);
            curve.delta.push(point.delta);
            curve.residual.push(4.0 * gamma - alpha * lf - density.excess() * log_j - theta);
        }
        if n == steps {
            break;
        }
        let h = opts.step;
        match opts.scheme {
            OdeScheme::Euler => {
                lf += h * df;
                lg += h * dg;
            }
            OdeScheme::Midpoint => {
                let (mf, mg, _) = rhs.eval(gamma + 0.5 * h, lf + 0.5 * h * df, lg + 0.5 * h * dg)?;
                lf += h * mf;
                lg += h * mg;
            }
        }
    }
    Ok(curve)
}

/// `chi(gamma)` along a solved curve.
pub fn overlap_limit_curve(curve: &HighDimCurve, density: &SpectralDensity) -> Result<Vec<f64>> {
    check_pair(curve, density)?;
    let quad = density.quadrature();
    Ok(curve.gamma.iter().zip(curve.log_j()).map(|(&g, lj)| overlap_at(density, &quad, g, lj).chi).collect())
}

/// `chi_inf - chi(gamma)` along a solved curve.
pub fn overlap_gap_curve(curve: &HighDimCurve, density: &SpectralDensity) -> Result<Vec<f64>> {
    check_pair(curve, density)?;
    let quad: BulkQuadrature = density.quadrature();
    Ok(curve.gamma.iter().zip(curve.log_j()).map(|(&g, lj)| overlap_at(density, &quad, g, lj).delta).collect())
}

fn check_pair(curve: &HighDimCurve, density: &SpectralDensity) -> Result<()> {
    if curve.alpha != density.alpha || curve.alphastar != density.alphastar {
        return Err(Error::InvalidParameter(format!(
            "curve solved for ({}, {}) but density has ({}, {})",
            curve.alpha, curve.alphastar, density.alpha, density.alphastar
        )));
    }
    Ok(())
}
