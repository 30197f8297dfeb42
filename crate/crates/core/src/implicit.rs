//! Closed-form solution of the flow written through the scalar `psi`:
//!
//! ```text
//! M(t) = e^{-psi(t)} e^{t Tr Z*} e^{2 Z* t} W0
//! Z(t) = M(t) (I_m + A(t))^{-1} M(t)^T,   A(t) = 4 int_0^t M^T M ds
//! psi' = Tr Z(t),   psi = 1/4 Tr log(I_m + A)
//! ```
//!
//! In the eigenbasis `Z* = V diag(mu) V^T` put `B = V^T W0`. Then `M = V D B`
//! with `D = diag(exp(-psi + t Tr Z* + 2 mu_k t))` and `A = B^T diag(a) B`
//! where `a_k = 4 int_0^t D_k^2 ds`, so the accumulator is one scalar per
//! eigendirection (kept as a logarithm).
//!
//! `(I + A)^{-1}` is never formed. With `G = [I_m; diag(sqrt a) B] = Q R`,
//! `I + A = R^T R` and `D B R^{-1} = diag(D / sqrt a) Q_2`, so
//! `Z = V K K^T V^T` with `K = diag(D / sqrt a) Q_2`. Rows of `G` are sorted by
//! norm before the Householder factorization, which keeps it accurate for the
//! strongly graded scales that appear at large `t`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{GramState, WeightMatrix};

/// Default tolerance on `|psi - 1/4 Tr log(I + A)|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

const CORRECTOR_SWEEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitConfig {
    pub horizon: f64,
    pub dt: f64,
    pub record_stride: usize,
    pub residual_tolerance: f64,
}

impl Default for ImplicitConfig {
    fn default() -> Self {
        Self { horizon: 10.0, dt: 1e-3, record_stride: 10, residual_tolerance: RESIDUAL_TOLERANCE }
    }
}

#[derive(Debug, Clone)]
pub struct ImplicitSample {
    pub t: f64,
    pub psi: f64,
    pub residual: f64,
    pub z: DMatrix<f64>,
}

/// `psi`, the accumulator and the cached spectral data of `Z*` at time `t`.
#[derive(Debug, Clone)]
pub struct ImplicitState {
    pub t: f64,
    pub psi: f64,
    /// `log a_k` per eigendirection of `Z*` (`-inf` at `t = 0`).
    log_acc: Vec<f64>,
    basis: DMatrix<f64>,
    mu: Vec<f64>,
    coeffs: DMatrix<f64>,
    trace_star: f64,
}

/// Result of assembling `Z` at one time.
struct Assembled {
    /// `K` with `Z = V K K^T V^T`.
    k: DMatrix<f64>,
    /// `1/4 Tr log(I + A)`.
    quarter_logdet: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl ImplicitState {
    pub fn new(w0: &WeightMatrix, zstar: &GramState) -> Result<Self> {
        if w0.d() != zstar.dim() {
            return Err(Error::DimensionMismatch(format!("W0 has {} rows, Z* is {}-dimensional", w0.d(), zstar.dim())));
        }
        let basis = zstar.eigenvectors().clone();
        let coeffs = basis.transpose() * w0.entries();
        Ok(Self {
            t: 0.0,
            psi: 0.0,
            log_acc: vec![f64::NEG_INFINITY; zstar.dim()],
            basis,
            mu: zstar.eigenvalues().iter().copied().collect(),
            coeffs,
            trace_star: zstar.trace(),
        })
    }

    pub fn m(&self) -> usize {
        self.coeffs.ncols()
    }

    /// `log D_k = -psi + t Tr Z* + 2 mu_k t`.
    fn log_scale(&self, k: usize, t: f64, psi: f64) -> f64 {
        -psi + t * self.trace_star + 2.0 * self.mu[k] * t
    }

    /// Accumulator `A = B^T diag(a) B` in the original student coordinates.
    pub fn accumulator(&self) -> DMatrix<f64> {
        let mut scaled = self.coeffs.clone();
        for (k, mut row) in scaled.row_iter_mut().enumerate() {
            row *= self.log_acc[k].exp();
        }
        self.coeffs.transpose() * scaled
    }

    fn assemble(&self, t: f64, psi: f64, log_acc: &[f64]) -> Result<Assembled> {
        let (d, m) = (self.coeffs.nrows(), self.coeffs.ncols());
        if log_acc.iter().all(|v| *v == f64::NEG_INFINITY) {
            let mut k = self.coeffs.clone();
            for (j, mut row) in k.row_iter_mut().enumerate() {
                row *= self.log_scale(j, t, psi).exp();
            }
            return Ok(Assembled { k, quarter_logdet: 0.0 });
        }
        let half: Vec<f64> = log_acc.iter().map(|v| 0.5 * v).collect();
        let c = half.iter().cloned().fold(0.0, f64::max);

        // Rows of G scaled by e^{-c}: identity rows first, then sqrt(a_k) B_k.
        let mut rows: Vec<(f64, usize)> = Vec::with_capacity(m + d);
        for j in 0..m {
            rows.push((-c, j));
        }
        for k in 0..d {
            let norm = self.coeffs.row(k).norm();
            let lognorm = if norm > 0.0 { half[k] - c + norm.ln() } else { f64::NEG_INFINITY };
            rows.push((lognorm, m + k));
        }
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut g = DMatrix::zeros(m + d, m);
        let mut position = vec![0usize; m + d];
        for (pos, &(_, src)) in rows.iter().enumerate() {
            position[src] = pos;
            if src < m {
                g[(pos, src)] = (-c).exp();
            } else {
                let k = src - m;
                let s = (half[k] - c).exp();
                for j in 0..m {
                    g[(pos, j)] = s * self.coeffs[(k, j)];
                }
            }
        }
        let qr = g.qr();
        let r = qr.r();
        let mut sum_log = 0.0;
        for j in 0..m {
            let v = r[(j, j)].abs();
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::IllConditioned(format!("singular factor of I + A at t = {t}")));
            }
            sum_log += v.ln();
        }
        let q = qr.q();
        let mut k = DMatrix::zeros(d, m);
        for row in 0..d {
            let f = (self.log_scale(row, t, psi) - half[row]).exp();
            let src = position[m + row];
            for j in 0..m {
                k[(row, j)] = f * q[(src, j)];
            }
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("assembled Z at t = {t}")));
        }
        Ok(Assembled { k, quarter_logdet: 0.5 * (m as f64 * c + sum_log) })
    }

    /// `Z(t)` at the current state.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        let a = self.assemble(self.t, self.psi, &self.log_acc)?;
        let vk = &self.basis * a.k;
        Ok(&vk * vk.transpose())
    }

    /// `log a_k(t1)` from `log a_k(t0)`, integrating `4 D_k^2` exactly under
    /// the assumption that `psi` is linear on `[t0, t1]`.
    fn accumulate(&self, t0: f64, t1: f64, psi1: f64, out: &mut [f64]) {
        let dt = t1 - t0;
        for (k, slot) in out.iter_mut().enumerate() {
            let a = 2.0 * self.log_scale(k, t0, self.psi);
            let b = 2.0 * self.log_scale(k, t1, psi1);
            let delta = b - a;
            let log_ratio = if delta.abs() < 1e-8 { 0.5 * delta } else { (delta.exp_m1() / delta).ln() };
            *slot = log_add_exp(self.log_acc[k], (4.0 * dt).ln() + a + log_ratio);
        }
    }

    /// Advances by `dt`: exponential accumulator and trapezoidal `psi`, with the
    /// implicit coupling resolved by a few corrector sweeps.
    fn advance(&mut self, dt: f64) -> Result<Assembled> {
        let t0 = self.t;
        let t1 = t0 + dt;
        let now = self.assemble(t0, self.psi, &self.log_acc)?;
        let tr0 = now.k.norm_squared();
        let mut psi1 = self.psi + dt * tr0;
        let mut next_acc = self.log_acc.clone();
        let mut out = None;
        for _ in 0..CORRECTOR_SWEEPS {
            self.accumulate(t0, t1, psi1, &mut next_acc);
            let asm = self.assemble(t1, psi1, &next_acc)?;
            let updated = self.psi + 0.5 * dt * (tr0 + asm.k.norm_squared());
            let change = (updated - psi1).abs();
            psi1 = updated;
            out = Some(asm);
            if change <= 1e-15 * psi1.abs().max(1.0) {
                break;
            }
        }
        // Final accumulator consistent with the converged psi.
        self.accumulate(t0, t1, psi1, &mut next_acc);
        self.t = t1;
        self.psi = psi1;
        self.log_acc = next_acc;
        match out {
            Some(_) => self.assemble(t1, psi1, &self.log_acc),
            None => unreachable!("at least one corrector sweep"),
        }
    }

    /// Perturbs `psi`, for fault-injection checks of the residual monitor.
    pub fn perturb_psi(&mut self, delta: f64) {
        self.psi += delta;
    }
}

/// `|psi - 1/4 Tr log(I + A)|`.
pub fn check_self_consistency(state: &ImplicitState) -> Result<f64> {
    let a = state.assemble(state.t, state.psi, &state.log_acc)?;
    Ok((state.psi - a.quarter_logdet).abs())
}

fn sample(state: &ImplicitState, asm: &Assembled) -> ImplicitSample {
    let vk = &state.basis * &asm.k;
    let z = &vk * vk.transpose();
    ImplicitSample { t: state.t, psi: state.psi, residual: (state.psi - asm.quarter_logdet).abs(), z: (&z + z.transpose()) * 0.5 }
}

/// Evolves the implicit solution to `cfg.horizon`, returning every
/// `record_stride`-th state (and the last one).
pub fn evolve_implicit(w0: &WeightMatrix, zstar: &GramState, cfg: &ImplicitConfig) -> Result<Vec<ImplicitSample>> {
    let (samples, _) = evolve_implicit_state(w0, zstar, cfg)?;
    Ok(samples)
}

/// Like [`evolve_implicit`] but also returns the final state.
pub fn evolve_implicit_state(
    w0: &WeightMatrix,
    zstar: &GramState,
    cfg: &ImplicitConfig,
) -> Result<(Vec<ImplicitSample>, ImplicitState)> {
    if !(cfg.dt > 0.0) || !(cfg.horizon >= 0.0) || cfg.record_stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, horizon >= 0 and stride >= 1 (got {}, {}, {})",
            cfg.dt, cfg.horizon, cfg.record_stride
        )));
    }
    let mut state = ImplicitState::new(w0, zstar)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut samples = vec![ImplicitSample { t: 0.0, psi: 0.0, residual: 0.0, z: w0.gram_matrix() }];
    for n in 1..=steps {
        let asm = state.advance(cfg.dt)?;
        let residual = (state.psi - asm.quarter_logdet).abs();
        if !(residual <= cfg.residual_tolerance) {
            return Err(Error::ResidualBreach { t: state.t, residual, tolerance: cfg.residual_tolerance });
        }
        if n % cfg.record_stride == 0 || n == steps {
            samples.push(sample(&state, &asm));
        }
    }
    Ok((samples, state))
}

/// CSV with header `t,psi,residual,dist_to_flow`; `dist` holds the Frobenius
/// distance to a reference trajectory at the same times.
pub fn comparison_csv(samples: &[ImplicitSample], dist: &[f64]) -> String {
    let mut s = String::from("t,psi,residual,dist_to_flow\n");
    for (smp, dd) in samples.iter().zip(dist) {
        s.push_str(&format!("{:e},{:e},{:e},{:e}\n", smp.t, smp.psi, smp.residual, dd));
    }
    s
}
