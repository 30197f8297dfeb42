//! Objects of the limit `d -> infinity` at fixed ratios `alpha = m/d`,
//! `alpha* = m*/d`, for orthonormal initializations.

pub mod density;
pub mod histogram;
pub mod ode;
pub mod overlap;

pub use density::{manova_density, BulkQuadrature, SpectralDensity};
pub use histogram::{density_histogram_compare, HistogramReport};
pub use ode::{overlap_gap_curve, overlap_limit_curve, solve_phi, solve_phi_with, HighDimCurve, OdeScheme, SolveOptions};
pub use overlap::{overlap_at, OverlapPoint};
