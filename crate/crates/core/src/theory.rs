//! Closed-form predictions: limit Gram matrices, convergence-rate classes and
//! overlap limits.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::GramState;

/// Minimal gap between consecutive teacher eigenvalues for the
/// underparameterized limit to be unique.
pub const SIMPLICITY_GAP: f64 = 1e-8;

/// Non-zero teacher spectrum `mu_1 >= .. >= mu_{m*} > 0` with eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectrumSpec {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectrumSpec {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyInput("teacher spectrum"));
        }
        if eigenvalues.len() != eigenvectors.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for {} eigenvectors",
                eigenvalues.len(),
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("eigenvalues must be positive and finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("eigenvalues must be sorted descending".into()));
        }
        let k = eigenvectors.ncols();
        let err = (eigenvectors.transpose() * &eigenvectors - DMatrix::<f64>::identity(k, k)).norm();
        if err > 1e-8 {
            return Err(Error::InvalidParameter(format!("eigenvectors not orthonormal (error {err:e})")));
        }
        Ok(Self { eigenvalues, eigenvectors })
    }

    /// Extracts the eigenvalues above `tol * lambda_max` from a Gram state.
    pub fn from_gram(zstar: &GramState, tol: f64) -> Result<Self> {
        let r = zstar.rank(tol);
        let vals = zstar.eigenvalues().iter().take(r).copied().collect();
        Self::new(vals, zstar.eigenvectors().columns(0, r).into_owned())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Smallest non-zero eigenvalue.
    pub fn mu_min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn to_gram(&self) -> Result<GramState> {
        GramState::from_spectrum(&self.eigenvalues, &self.eigenvectors)
    }
}

/// Shift `tau = sum_{k>m} mu_k / (m + 2)`; zero when `m >= m*`.
pub fn tau_shift(spec: &SpectrumSpec, m: usize) -> f64 {
    let tail: f64 = spec.eigenvalues.iter().skip(m).sum();
    tail / (m as f64 + 2.0)
}

/// Predicted limit `W_inf W_inf^T` of the flow from a generic initialization.
pub fn fixed_point_gram(spec: &SpectrumSpec, m: usize) -> Result<GramState> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    if m >= spec.rank() {
        return spec.to_gram();
    }
    let mu = &spec.eigenvalues;
    for w in mu.windows(2) {
        let gap = w[0] - w[1];
        if gap <= SIMPLICITY_GAP {
            return Err(Error::RepeatedEigenvalues { gap, tolerance: SIMPLICITY_GAP });
        }
    }
    let tau = tau_shift(spec, m);
    let shifted: Vec<f64> = mu.iter().take(m).map(|v| v + tau).collect();
    GramState::from_spectrum(&shifted, &spec.eigenvectors.columns(0, m).into_owned())
}

/// Asymptotic loss decay class of an overparameterized flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateClass {
    /// `m, m* >= d`: `L = O(exp(-8 mu t))`.
    Exp8Mu { mu: f64 },
    /// `m = m* < d`: `L = O(exp(-4 mu t))`.
    Exp4Mu { mu: f64 },
    /// `m, d > m*`: `L = O(t^-2)`.
    PolyInverseT2 { mu: f64 },
}

impl RateClass {
    pub fn mu(&self) -> f64 {
        match *self {
            RateClass::Exp8Mu { mu } | RateClass::Exp4Mu { mu } | RateClass::PolyInverseT2 { mu } => mu,
        }
    }

    /// Predicted slope of `log L` against `t`, for the exponential classes.
    pub fn log_loss_slope(&self) -> Option<f64> {
        match *self {
            RateClass::Exp8Mu { mu } => Some(-8.0 * mu),
            RateClass::Exp4Mu { mu } => Some(-4.0 * mu),
            RateClass::PolyInverseT2 { .. } => None,
        }
    }
}

pub fn classify_rate(m: usize, mstar: usize, d: usize, spec: &SpectrumSpec) -> Result<RateClass> {
    if mstar != spec.rank() {
        return Err(Error::DimensionMismatch(format!(
            "m* = {mstar} but the spectrum has rank {}",
            spec.rank()
        )));
    }
    if m < mstar.min(d) {
        return Err(Error::OutOfScope(format!(
            "m = {m} < min(m*, d) = {}: underparameterized",
            mstar.min(d)
        )));
    }
    let mu = spec.mu_min();
    Ok(if mstar >= d {
        RateClass::Exp8Mu { mu }
    } else if m == mstar {
        RateClass::Exp4Mu { mu }
    } else {
        RateClass::PolyInverseT2 { mu }
    })
}

fn check_ratio(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::InvalidParameter(format!("{name} = {v} outside (0, 1]")));
    }
    Ok(())
}

/// Limit overlap of independent uniform projections with ratios `alpha`, `alphastar`.
pub fn random_overlap_limit(alpha: f64, alphastar: f64) -> Result<f64> {
    check_ratio("alpha", alpha)?;
    check_ratio("alphastar", alphastar)?;
    Ok((alpha * alphastar).sqrt())
}

/// Largest overlap with a teacher `Z* = U* U*^T / m*` (a scaled rank-`m*`
/// projector) reachable by a PSD matrix of rank at most `m`. Teachers with
/// unequal eigenvalues can be matched more closely.
pub fn max_overlap(m: usize, mstar: usize) -> Result<f64> {
    if m == 0 || mstar == 0 {
        return Err(Error::InvalidParameter("m and m* must be at least 1".into()));
    }
    Ok((m as f64 / mstar as f64).sqrt().min(1.0))
}
