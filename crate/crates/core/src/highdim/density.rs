//! Limiting spectral measure of `Y = U0^T U* U*^T U0` and the transforms
//! `Theta`, `Theta'` built on it.
//!
//! The measure has atoms at 0 and 1 and a bulk
//! `w(x) = sqrt((r+ - x)(x - r-)) / (2 pi alpha x (1 - x))` on `[r-, r+]`.
//!
//! Bulk integrals use `x = r- + (r+ - r-) sin^2(theta)` followed by
//! `theta = atan(e^y)`. In `y` every integrand used here is analytic in the
//! strip `|Im y| < pi/2` and decays exponentially at both ends, so the plain
//! trapezoidal rule converges geometrically. The second map also resolves the
//! boundary layer of `1 / (1 + u x)` at `x ~ 1/u` when `r- = 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate};

/// Default number of trapezoidal nodes (doubled when `r- = 0`).
pub const DEFAULT_NODES: usize = 4096;

/// Range of the `y` variable covered by the trapezoidal rule.
const Y_MIN: f64 = -160.0;
const Y_MAX: f64 = 40.0;

/// Gauss-Legendre order used per sub-interval for bulk masses.
const MASS_ORDER: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    pub alpha: f64,
    pub alphastar: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    /// Weight `(1 - alpha*/alpha)^+` of the atom at 0.
    pub atom0: f64,
    /// Weight `(alpha + alpha* - 1)^+ / alpha` of the atom at 1.
    pub atom1: f64,
}

pub fn manova_density(alpha: f64, alphastar: f64) -> Result<SpectralDensity> {
    for (name, v) in [("alpha", alpha), ("alphastar", alphastar)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {v} outside (0, 1]")));
        }
    }
    let p = (alpha * (1.0 - alphastar)).sqrt();
    let q = (alphastar * (1.0 - alpha)).sqrt();
    Ok(SpectralDensity {
        alpha,
        alphastar,
        r_minus: (p - q) * (p - q),
        r_plus: ((p + q) * (p + q)).min(1.0),
        atom0: (1.0 - alphastar / alpha).max(0.0),
        atom1: (alpha + alphastar - 1.0).max(0.0) / alpha,
    })
}

impl SpectralDensity {
    /// `(alpha + alpha* - 1)^+`.
    pub fn excess(&self) -> f64 {
        (self.alpha + self.alphastar - 1.0).max(0.0)
    }

    pub fn width(&self) -> f64 {
        self.r_plus - self.r_minus
    }

    /// Bulk density `w(x)`; zero outside `(r-, r+)`.
    pub fn bulk_density(&self, x: f64) -> f64 {
        if !(x > self.r_minus && x < self.r_plus) {
            return 0.0;
        }
        ((self.r_plus - x) * (x - self.r_minus)).sqrt() / (2.0 * PI * self.alpha * x * (1.0 - x))
    }

    /// Overlap of the initialization, `sqrt(alpha alpha*)`.
    pub fn initial_overlap(&self) -> f64 {
        (self.alpha * self.alphastar).sqrt()
    }

    /// Overlap reached as `gamma -> infinity`, `min(sqrt(alpha/alpha*), 1)`.
    pub fn limit_overlap(&self) -> f64 {
        (self.alpha / self.alphastar).sqrt().min(1.0)
    }

    /// Slope of `Theta(u)` against `log u` for large `u`.
    pub fn theta_log_slope(&self) -> f64 {
        0.5 * (1.0 - (self.alpha - self.alphastar).abs() - (self.alpha + self.alphastar - 1.0).abs())
    }

    /// `Theta'(u)` in closed form.
    ///
    /// Partial fractions reduce the integral to Stieltjes transforms of the
    /// semicircle-shaped weight `sqrt((b - x)(x - a))`, each of which is
    /// elementary. The expression is written without cancellation for small
    /// and large `u`.
    pub fn theta_prime(&self, u: f64) -> Result<f64> {
        check_u(u)?;
        let (a, b) = (self.r_minus, self.r_plus);
        let root = ((1.0 + u * a) * (1.0 + u * b)).sqrt();
        let inner = 1.0 - ((1.0 - a) * (1.0 - b)).max(0.0).sqrt() - (a + b + a * b * u) / (1.0 + root);
        Ok((0.5 * inner / (1.0 + u)).max(0.0))
    }

    /// Trapezoidal rule for the bulk with the default node count.
    pub fn quadrature(&self) -> BulkQuadrature {
        let nodes = if self.r_minus == 0.0 { 2 * DEFAULT_NODES } else { DEFAULT_NODES };
        BulkQuadrature::new(self, nodes)
    }

    /// Bulk mass in `[lo, hi]`.
    pub fn bulk_mass_between(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = (self.r_minus, self.r_plus);
        let width = b - a;
        let lo = lo.max(a);
        let hi = hi.min(b);
        if !(hi > lo) || !(width > 0.0) {
            return 0.0;
        }
        let angle = |x: f64| ((x - a) / width).clamp(0.0, 1.0).sqrt().asin();
        let (t0, t1) = (angle(lo), angle(hi));
        let rule = gauss_legendre(MASS_ORDER);
        // w(x) dx = width^2 sin^2 cos^2 / (pi alpha x (1 - x)) d(theta)
        let f = |t: f64| {
            let (s, c) = t.sin_cos();
            let (s2, c2) = (s * s, c * c);
            let x = a + width * s2;
            let omx = (1.0 - b) + width * c2;
            width * width * s2 * c2 / (PI * self.alpha * x * omx)
        };
        // Split so that each panel sees a smooth integrand at full resolution.
        let panels = 8;
        let h = (t1 - t0) / panels as f64;
        (0..panels).map(|k| integrate(f, t0 + k as f64 * h, t0 + (k + 1) as f64 * h, &rule)).sum()
    }

    /// Total bulk mass.
    pub fn bulk_mass(&self) -> f64 {
        self.bulk_mass_between(self.r_minus, self.r_plus)
    }

    /// Cumulative distribution function of the full measure (atoms included).
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let mut v = self.atom0 + self.bulk_mass_between(self.r_minus, x);
        if x >= 1.0 {
            v += self.atom1;
        }
        v.min(1.0)
    }
}

fn check_u(u: f64) -> Result<()> {
    if !(u > -1.0) {
        return Err(Error::InvalidParameter(format!("Theta requires u > -1, got {u}")));
    }
    Ok(())
}

/// Nodes `x_j`, `1 - x_j` and weights `w(x_j) dx_j` for bulk integrals.
#[derive(Debug, Clone)]
pub struct BulkQuadrature {
    alpha: f64,
    x: Vec<f64>,
    one_minus_x: Vec<f64>,
    weight: Vec<f64>,
}

impl BulkQuadrature {
    pub fn new(density: &SpectralDensity, nodes: usize) -> Self {
        let (a, b) = (density.r_minus, density.r_plus);
        let width = b - a;
        let mut q = Self { alpha: density.alpha, x: Vec::new(), one_minus_x: Vec::new(), weight: Vec::new() };
        if !(width > 0.0) || nodes < 2 {
            return q;
        }
        let h = (Y_MAX - Y_MIN) / (nodes - 1) as f64;
        let scale = h * width * width / (PI * density.alpha);
        for j in 0..nodes {
            let y = Y_MIN + j as f64 * h;
            // s = sin^2(theta), c = cos^2(theta) with tan(theta) = e^y.
            let s = 1.0 / (1.0 + (-2.0 * y).exp());
            let c = 1.0 / (1.0 + (2.0 * y).exp());
            let x = a + width * s;
            let omx = (1.0 - b) + width * c;
            let wgt = scale * (s * c).powf(1.5) / (x * omx);
            if wgt > 0.0 && wgt.is_finite() {
                q.x.push(x);
                q.one_minus_x.push(omx);
                q.weight.push(wgt);
            }
        }
        q
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `sum_j w_j f(x_j, 1 - x_j)`, i.e. the bulk integral of `f` against `mu`.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.x
            .iter()
            .zip(&self.one_minus_x)
            .zip(&self.weight)
            .map(|((&x, &omx), &w)| w * f(x, omx))
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.weight.iter().sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.integrate(|x, _| x)
    }

    /// `Theta(u) = (1/2pi) int sqrt((r+ - x)(x - r-)) / (x (1 - x)) log(1 + u x) dx`.
    pub fn theta(&self, u: f64) -> Result<f64> {
        check_u(u)?;
        Ok(self.alpha * self.integrate(|x, _| (u * x).ln_1p()))
    }

    /// `Theta'(u)` by differentiating under the integral sign.
    pub fn theta_prime(&self, u: f64) -> Result<f64> {
        check_u(u)?;
        Ok(self.alpha * self.integrate(|x, _| x / (1.0 + u * x)))
    }
}
