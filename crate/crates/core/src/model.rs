//! Predictor, population loss, gradient and overlap of the quadratic network.
//!
//! A network with `m` neurons is stored through its normalized weight matrix
//! `W = [w_1 .. w_m] / sqrt(m)`, so the prediction is `||W^T x||^2` and only the
//! Gram matrix `Z = W W^T` matters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are rounded to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Normalized `d x m` weight matrix (columns already divided by `sqrt(m)`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
}

impl WeightMatrix {
    /// Wraps an already normalized matrix.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidParameter("weight matrix needs d >= 1 and m >= 1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight matrix entries".into()));
        }
        Ok(Self { entries })
    }

    /// Applies the `1/sqrt(m)` convention to raw neuron weights `[w_1 .. w_m]`.
    pub fn from_neurons(raw: DMatrix<f64>) -> Result<Self> {
        let m = raw.ncols().max(1) as f64;
        Self::new(raw / m.sqrt())
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// `W W^T` as a raw matrix.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        &self.entries * self.entries.transpose()
    }

    /// `W W^T` with its eigendecomposition.
    pub fn gram(&self) -> Result<GramState> {
        GramState::new(self.gram_matrix())
    }
}

/// Symmetric PSD matrix with a cached eigendecomposition (eigenvalues descending).
#[derive(Debug, Clone)]
pub struct GramState {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl GramState {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Gram matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix entries".into()));
        }
        let scale = matrix.norm();
        let asym = (&matrix - matrix.transpose()).norm();
        if scale > 0.0 && asym > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric(asym / scale));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        let (mut eigenvalues, eigenvectors) = sorted_eigen(&matrix);
        let floor = -PSD_TOLERANCE * scale.max(1.0);
        for v in eigenvalues.iter_mut() {
            if *v < floor {
                return Err(Error::NotPsd(*v));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self { matrix, eigenvalues, eigenvectors })
    }

    /// Builds `V diag(lambda) V^T` from a spectrum (any order; sorted internally).
    pub fn from_spectrum(eigenvalues: &[f64], eigenvectors: &DMatrix<f64>) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for {} eigenvectors",
                eigenvalues.len(),
                eigenvectors.ncols()
            )));
        }
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        let m = eigenvectors * lam * eigenvectors.transpose();
        Self::new((&m + m.transpose()) * 0.5)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Number of eigenvalues above `tol * lambda_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.eigenvalues.get(0).copied().unwrap_or(0.0);
        self.eigenvalues.iter().filter(|&&v| v > tol * top && v > 0.0).count()
    }

    /// Factor `L = V_r diag(sqrt(lambda_r))` with `L L^T` equal to the matrix up to
    /// the discarded eigenvalues below `tol * lambda_max`.
    pub fn low_rank_factor(&self, tol: f64) -> DMatrix<f64> {
        let r = self.rank(tol);
        let mut l = self.eigenvectors.columns(0, r).into_owned();
        for (k, mut col) in l.column_iter_mut().enumerate() {
            col *= self.eigenvalues[k].sqrt();
        }
        l
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
/// Ties keep the solver's output order.
pub fn sorted_eigen(matrix: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(matrix.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(matrix.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// A single input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    x: DVector<f64>,
}

impl DataPoint {
    pub fn new(x: DVector<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data point".into()));
        }
        Ok(Self { x })
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }
}

/// `u(x) = ||W^T x||^2 = Tr(x x^T W W^T)`.
pub fn predict(w: &WeightMatrix, x: &DataPoint) -> Result<f64> {
    if w.d() != x.x.len() {
        return Err(Error::DimensionMismatch(format!(
            "W has {} rows, x has length {}",
            w.d(),
            x.x.len()
        )));
    }
    Ok((w.entries.transpose() * &x.x).norm_squared())
}

fn check_rows(w: &WeightMatrix, zstar: &GramState) -> Result<()> {
    if w.d() != zstar.dim() {
        return Err(Error::DimensionMismatch(format!(
            "W has {} rows, Z* is {}x{}",
            w.d(),
            zstar.dim(),
            zstar.dim()
        )));
    }
    Ok(())
}

/// `Delta = W W^T - Z*`.
pub fn gram_gap(w: &WeightMatrix, zstar: &GramState) -> Result<DMatrix<f64>> {
    check_rows(w, zstar)?;
    Ok(w.gram_matrix() - zstar.matrix())
}

/// Loss as a function of the gap `Delta`: `1/2 ||Delta||_F^2 + 1/4 (Tr Delta)^2`.
pub fn loss_from_gap(delta: &DMatrix<f64>) -> f64 {
    let tr = delta.trace();
    0.5 * delta.norm_squared() + 0.25 * tr * tr
}

/// Population loss under standard Gaussian inputs.
pub fn population_loss(w: &WeightMatrix, zstar: &GramState) -> Result<f64> {
    Ok(loss_from_gap(&gram_gap(w, zstar)?))
}

/// `grad L(W) = 2 Delta W + Tr(Delta) W`.
pub fn loss_gradient(w: &WeightMatrix, zstar: &GramState) -> Result<DMatrix<f64>> {
    let delta = gram_gap(w, zstar)?;
    let tr = delta.trace();
    Ok(&delta * w.entries() * 2.0 + w.entries() * tr)
}

/// `|Tr(A B)| / (||A||_F ||B||_F)` for symmetric matrices.
pub fn overlap_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "overlap of {:?} and {:?} matrices",
            a.shape(),
            b.shape()
        )));
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 {
        return Err(Error::ZeroMatrix("first overlap argument"));
    }
    if nb == 0.0 {
        return Err(Error::ZeroMatrix("second overlap argument"));
    }
    // Tr(A B) = <A, B>_F for symmetric A, B.
    Ok((a.dot(b).abs() / (na * nb)).min(1.0))
}

/// Overlap `chi(Z, Z*)` between two Gram states.
pub fn overlap(z: &GramState, zstar: &GramState) -> Result<f64> {
    overlap_matrices(z.matrix(), zstar.matrix())
}
