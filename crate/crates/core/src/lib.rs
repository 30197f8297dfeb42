//! Gradient flow of shallow networks with quadratic activation in the
//! teacher-student setting, under Gaussian inputs and the population loss.
//!
//! * [`model`]: predictor, loss, gradient and overlap.
//! * [`sampling`]: seeded Stiefel frames, Gaussian weights and `Y = U0^T U* U*^T U0`.
//! * [`flow`]: gradient descent with trajectory recording.
//! * [`implicit`]: the closed-form solution through the scalar `psi`.
//! * [`theory`]: limit Gram matrices, rate classes and overlap limits.
//! * [`highdim`]: spectral density, `Theta`, the `(F, J)` system and `chi(gamma)`.
//! * [`fit`]: slope estimates for decay rates.

pub mod error;
pub mod fit;
pub mod flow;
pub mod highdim;
pub mod implicit;
pub mod model;
pub mod quadrature;
pub mod sampling;
pub mod theory;

pub use error::{Error, Result};
