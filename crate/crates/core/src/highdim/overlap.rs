//! Limiting overlap `chi(gamma)` and its gap `delta = chi_inf - chi`.
//!
//! With `E = e^{4 gamma / alpha*}`, `u = J - 1` and `h(x) = 1 / (1 + u x)`:
//!
//! ```text
//! chi = sqrt(alpha/alpha*) * E * A / sqrt(B)
//! A   = int x h dmu
//! B   = int ((1 + (E - 1) x) h)^2 dmu
//! ```
//!
//! Everything is evaluated after dividing `B` by `E^2`, and `delta` is formed
//! from a sum of non-negative terms (a variance plus a cross term) so that it
//! keeps full relative precision long after `chi` has converged to machine
//! precision.

use crate::highdim::density::{BulkQuadrature, SpectralDensity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapPoint {
    pub chi: f64,
    pub delta: f64,
}

/// Overlap at rescaled time `gamma` given `log J(gamma)`.
pub fn overlap_at(density: &SpectralDensity, quad: &BulkQuadrature, gamma: f64, log_j: f64) -> OverlapPoint {
    let (alpha, alphastar) = (density.alpha, density.alphastar);
    let c = (alpha / alphastar).sqrt();
    let chi_inf = density.limit_overlap();
    let inv_e = (-4.0 * gamma / alphastar).exp();
    let u = log_j.exp_m1().max(0.0);
    let inv_j = (-log_j).exp();
    let a1 = density.atom1;
    // Measure rho = mu restricted to (0, 1], of mass p.
    let p = 1.0 - density.atom0;

    let h = |x: f64| 1.0 / (1.0 + u * x);
    let big_a = a1 * inv_j + quad.integrate(|x, _| x * h(x));
    let s1 = quad.integrate(|x, omx| omx * h(x));
    let mean_h = (a1 * inv_j + quad.integrate(|x, _| h(x))) / p;
    let var_h = (a1 * (inv_j - mean_h).powi(2) + quad.integrate(|x, _| (h(x) - mean_h).powi(2))) / p;
    let b_hat = density.atom0 * inv_e * inv_e
        + a1 * inv_j * inv_j
        + quad.integrate(|x, omx| {
            let g = (x + omx * inv_e) * h(x);
            g * g
        });

    let chi = (c * big_a / b_hat.sqrt()).clamp(0.0, 1.0);
    let k = if u > 0.0 { inv_e - (1.0 - inv_e) / u } else { 0.0 };
    let num = chi_inf
        * chi_inf
        * (density.atom0 * inv_e * inv_e + p * k * k * var_h + (s1 * inv_e / p) * (2.0 * big_a + s1 * inv_e));
    let delta = num / (b_hat.sqrt() * (chi_inf * b_hat.sqrt() + c * big_a));
    OverlapPoint { chi, delta }
}
