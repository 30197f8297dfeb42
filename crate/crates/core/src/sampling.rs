//! Seeded random teachers and students: uniform Stiefel frames, Gaussian
//! weights and the projection product `Y = U0^T U* U*^T U0`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{sorted_eigen, WeightMatrix};

/// Eigenvalue floor used when forming `(V^T V)^{-1/2}`.
pub const GRAM_FLOOR: f64 = 1e-12;

const MAX_RESAMPLES: usize = 16;

/// Seeded ChaCha8 stream. Equal seeds give bit-identical draws.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        "ChaCha8"
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `rows x cols` matrix of i.i.d. standard normals, filled column by column.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| self.normal())
    }
}

/// `d x k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    u: DMatrix<f64>,
}

impl OrthonormalFrame {
    /// Wraps `u`, checking `||U^T U - I||_F <= 1e-10`.
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        if u.ncols() == 0 || u.ncols() > u.nrows() {
            return Err(Error::InvalidParameter(format!(
                "frame must satisfy 1 <= k <= d, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let err = orthonormality_error(&u);
        if !(err <= 1e-10) {
            return Err(Error::InvalidParameter(format!("columns not orthonormal (error {err:e})")));
        }
        Ok(Self { u })
    }

    pub fn d(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Weights `U / sqrt(k)`, whose Gram matrix is the projector divided by `k`.
    pub fn to_weights(&self) -> WeightMatrix {
        WeightMatrix::new(&self.u / (self.k() as f64).sqrt()).expect("finite frame")
    }
}

/// `||U^T U - I||_F`.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let k = u.ncols();
    (u.transpose() * u - DMatrix::<f64>::identity(k, k)).norm()
}

/// Polar factor `V (V^T V)^{-1/2}`, or `None` when `V^T V` is numerically singular.
fn polar_factor(v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (lam, q) = sorted_eigen(&(v.transpose() * v));
    let top = lam.max();
    if !(lam.min() > GRAM_FLOOR * top.max(1.0)) {
        return None;
    }
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= lam[j].sqrt();
    }
    Some(v * (scaled * q.transpose()))
}

/// Uniform draw on the Stiefel manifold of `d x k` orthonormal frames.
pub fn sample_stiefel(d: usize, k: usize, rng: &mut RngState) -> Result<OrthonormalFrame> {
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= d, got d={d}, k={k}")));
    }
    for _ in 0..MAX_RESAMPLES {
        let v = rng.normal_matrix(d, k);
        let Some(mut u) = polar_factor(&v) else { continue };
        // One refinement sweep removes the rounding left by ill-conditioned draws.
        if orthonormality_error(&u) > 1e-13 {
            match polar_factor(&u) {
                Some(refined) => u = refined,
                None => continue,
            }
        }
        return OrthonormalFrame::new(u);
    }
    Err(Error::IllConditioned(format!("{MAX_RESAMPLES} singular Gaussian draws in a row")))
}

/// Gaussian weights: entries `N(0, 1/d)` divided by `sqrt(m)`.
pub fn sample_gaussian_weights(d: usize, m: usize, rng: &mut RngState) -> Result<WeightMatrix> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("need d, m >= 1, got d={d}, m={m}")));
    }
    let scale = 1.0 / ((d * m) as f64).sqrt();
    WeightMatrix::new(rng.normal_matrix(d, m) * scale)
}

/// `Y = U0^T U* U*^T U0`, symmetric `m x m` with spectrum in `[0, 1]`.
pub fn build_projection_product(u0: &OrthonormalFrame, ustar: &OrthonormalFrame) -> Result<DMatrix<f64>> {
    if u0.d() != ustar.d() {
        return Err(Error::DimensionMismatch(format!(
            "frames live in dimensions {} and {}",
            u0.d(),
            ustar.d()
        )));
    }
    let c = u0.matrix().transpose() * ustar.matrix();
    let y = &c * c.transpose();
    Ok((&y + y.transpose()) * 0.5)
}

/// Eigenvalues of `Y`, ascending and clamped to `[0, 1]`.
pub fn projection_product_spectrum(u0: &OrthonormalFrame, ustar: &OrthonormalFrame) -> Result<Vec<f64>> {
    let y = build_projection_product(u0, ustar)?;
    let (vals, _) = sorted_eigen(&y);
    let mut v: Vec<f64> = vals.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    v.reverse();
    Ok(v)
}
