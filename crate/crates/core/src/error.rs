//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero matrix where a nonzero one is required: {0}")]
    ZeroMatrix(&'static str),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("repeated eigenvalues (gap {gap:e} below {tolerance:e}); the minimizer is not unique")]
    RepeatedEigenvalues { gap: f64, tolerance: f64 },

    #[error("configuration outside the supported regime: {0}")]
    OutOfScope(String),

    #[error("divergence at step {step}: loss {loss:e} exceeds 1e3 x initial loss {initial:e}")]
    Divergence { step: usize, loss: f64, initial: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("self-consistency residual {residual:e} exceeds {tolerance:e} at t = {t}")]
    ResidualBreach { t: f64, residual: f64, tolerance: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonFinite(_)
                | Error::IllConditioned(_)
                | Error::ResidualBreach { .. }
                | Error::NotPsd(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
