//! Gradient descent on the population loss, `W <- W - eta * grad L(W)`, with
//! recording of the loss, `Tr(Z - Z*)`, the integrated trace gap `phi_d` and
//! the overlap.
//!
//! [`integrate`] works on dense matrices for any initialization.
//! [`integrate_orthonormal`] runs the same iteration for orthonormal frames in
//! principal-angle coordinates: there every student column moves in its own
//! two-dimensional plane and the columns only couple through `Tr(Z - Z*)`, so
//! a step costs `O(m)` instead of `O(d m^2)`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{loss_from_gap, sorted_eigen, GramState, WeightMatrix};
use crate::sampling::OrthonormalFrame;

/// Abort when the loss exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Relative cutoff for the teacher's low-rank factor.
const RANK_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// Gradient step `eta`.
    pub step_size: f64,
    /// Horizon, in flow time `t` or in `gamma = t / d` when `rescaled` is set.
    pub horizon: f64,
    /// Record every `record_stride` steps (the last step is always recorded).
    pub record_stride: usize,
    pub rescaled: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { step_size: 1e-2, horizon: 10.0, record_stride: 100, rescaled: false }
    }
}

impl FlowConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size {} must be positive", self.step_size)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {} must be non-negative", self.horizon)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of gradient steps needed to reach the horizon in dimension `d`.
    pub fn steps(&self, d: usize) -> usize {
        let t = if self.rescaled { self.horizon * d as f64 } else { self.horizon };
        (t / self.step_size).round() as usize
    }
}

/// Samples of a gradient-descent run.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub d: usize,
    pub times: Vec<f64>,
    pub losses: Vec<f64>,
    pub trace_gaps: Vec<f64>,
    /// `phi_d = int_0^t Tr(Z(s) - Z*) ds`, trapezoidal over every step.
    pub phi: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub final_w: WeightMatrix,
}

impl FlowTrajectory {
    pub fn gammas(&self) -> Vec<f64> {
        self.times.iter().map(|t| t / self.d as f64).collect()
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trajectory has at least one sample")
    }

    pub fn final_overlap(&self) -> f64 {
        *self.overlaps.last().expect("trajectory has at least one sample")
    }

    /// CSV with header `t,gamma,loss,trace_gap,phi,overlap`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,gamma,loss,trace_gap,phi,overlap\n");
        let d = self.d as f64;
        for i in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[i],
                self.times[i] / d,
                self.losses[i],
                self.trace_gaps[i],
                self.phi[i],
                self.overlaps[i]
            );
        }
        s
    }
}

/// Piecewise-linear curve `gamma -> phi_d(gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiCurve {
    pub gamma: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PhiCurve {
    /// Linear interpolation, clamped at the ends.
    pub fn eval(&self, g: f64) -> f64 {
        interpolate(&self.gamma, &self.phi, g)
    }
}

/// Linear interpolation on a sorted grid, clamped at both ends.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - w) + ys[j] * w
}

/// `phi_d` against rescaled time `gamma = t / d`.
pub fn phi_curve(traj: &FlowTrajectory, d: usize) -> PhiCurve {
    PhiCurve { gamma: traj.times.iter().map(|t| t / d as f64).collect(), phi: traj.phi.clone() }
}

/// Running divergence and finiteness checks.
struct Guard {
    initial: f64,
}

impl Guard {
    fn check(&mut self, step: usize, loss: f64) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {step}")));
        }
        if step == 0 {
            self.initial = loss;
        } else if loss > DIVERGENCE_FACTOR * self.initial && loss > f64::MIN_POSITIVE {
            return Err(Error::Divergence { step, loss, initial: self.initial });
        }
        Ok(())
    }
}

/// Dense gradient descent from `w0` towards the teacher `zstar`.
pub fn integrate(w0: &WeightMatrix, zstar: &GramState, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    if w0.d() != zstar.dim() {
        return Err(Error::DimensionMismatch(format!("W0 has {} rows, Z* is {}-dimensional", w0.d(), zstar.dim())));
    }
    let d = w0.d();
    let eta = cfg.step_size;
    let steps = cfg.steps(d);
    let factor = zstar.low_rank_factor(RANK_TOLERANCE);
    let tr_star = zstar.trace();
    let zstar_norm2 = zstar.matrix().norm_squared();
    let zstar_norm = zstar_norm2.sqrt();

    let mut w = w0.entries().clone();
    let mut traj = FlowTrajectory {
        d,
        times: Vec::new(),
        losses: Vec::new(),
        trace_gaps: Vec::new(),
        phi: Vec::new(),
        overlaps: Vec::new(),
        final_w: w0.clone(),
    };
    let mut guard = Guard { initial: 0.0 };
    let mut phi = 0.0;
    let mut prev_tau = 0.0;

    for n in 0..=steps {
        let g = w.tr_mul(&w);
        let p = factor.tr_mul(&w);
        let tau = g.trace() - tr_star;
        if n > 0 {
            phi += 0.5 * eta * (prev_tau + tau);
        }
        prev_tau = tau;
        let cross = p.norm_squared();
        let znorm2 = g.norm_squared();
        let proxy = 0.5 * (znorm2 - 2.0 * cross + zstar_norm2).max(0.0) + 0.25 * tau * tau;
        guard.check(n, proxy)?;

        if n % cfg.record_stride == 0 || n == steps {
            let gap = &w * w.transpose() - zstar.matrix();
            let denom = znorm2.sqrt() * zstar_norm;
            traj.times.push(n as f64 * eta);
            traj.losses.push(loss_from_gap(&gap));
            traj.trace_gaps.push(tau);
            traj.phi.push(phi);
            traj.overlaps.push(if denom > 0.0 { (cross / denom).min(1.0) } else { 0.0 });
        }
        if n == steps {
            break;
        }
        let mut next = &w * &g;
        next.gemm(-1.0, &factor, &p, 1.0);
        let keep = 1.0 - eta * tau;
        w.zip_apply(&next, |a, b| *a = keep * *a - 2.0 * eta * b);
    }
    traj.final_w = WeightMatrix::new(w)?;
    Ok(traj)
}

/// Student column `i` lives in the plane spanned by a teacher direction `a_i`
/// and an orthogonal direction `b_i`; its coordinates are
/// `(c_i * fp_i, s_i * fq_i) / sqrt(m)` where `c_i^2` is an eigenvalue of
/// `Y = U0^T U* U*^T U0` and `fp_i`, `fq_i` are the products of the per-step
/// multiplicative updates.
struct PrincipalState {
    c: Vec<f64>,
    s: Vec<f64>,
    fp: Vec<f64>,
    fq: Vec<f64>,
    paired: usize,
    lone_teachers: usize,
    inv_m: f64,
    inv_ms: f64,
}

impl PrincipalState {
    fn coords(&self, i: usize) -> (f64, f64) {
        let scale = self.inv_m.sqrt();
        (self.c[i] * self.fp[i] * scale, self.s[i] * self.fq[i] * scale)
    }

    /// `(Tr Z - 1, ||Z||_F^2, Tr(Z Z*), loss)`.
    fn observables(&self) -> (f64, f64, f64, f64) {
        let mut tr = 0.0;
        let mut z2 = 0.0;
        let mut cross = 0.0;
        let mut gap2 = self.lone_teachers as f64 * self.inv_ms * self.inv_ms;
        for i in 0..self.c.len() {
            let (p, q) = self.coords(i);
            let (p2, q2) = (p * p, q * q);
            let n2 = p2 + q2;
            tr += n2;
            z2 += n2 * n2;
            if i < self.paired {
                cross += p2 * self.inv_ms;
                let e = p2 - self.inv_ms;
                gap2 += e * e + 2.0 * p2 * q2 + q2 * q2;
            } else {
                gap2 += q2 * q2;
            }
        }
        let tau = tr - 1.0;
        (tau, z2, cross, 0.5 * gap2 + 0.25 * tau * tau)
    }

    fn step(&mut self, eta: f64, tau: f64) {
        for i in 0..self.c.len() {
            let (p, q) = self.coords(i);
            let n2 = p * p + q * q;
            self.fq[i] *= 1.0 - eta * (2.0 * n2 + tau);
            if i < self.paired {
                self.fp[i] *= 1.0 - eta * (2.0 * n2 - 2.0 * self.inv_ms + tau);
            }
        }
    }
}

/// Gradient descent from `W0 = U0 / sqrt(m)` towards `Z* = U* U*^T / m*`, in
/// principal-angle coordinates. Produces the same iterates as [`integrate`]
/// (up to rounding) at a per-step cost linear in `m`.
pub fn integrate_orthonormal(
    u0: &OrthonormalFrame,
    ustar: &OrthonormalFrame,
    cfg: &FlowConfig,
) -> Result<FlowTrajectory> {
    cfg.validate()?;
    if u0.d() != ustar.d() {
        return Err(Error::DimensionMismatch(format!("frames in dimensions {} and {}", u0.d(), ustar.d())));
    }
    let (d, m, ms) = (u0.d(), u0.k(), ustar.k());
    let cmat = u0.matrix().transpose() * ustar.matrix();
    let (yvals, rot) = sorted_eigen(&(&cmat * cmat.transpose()));
    let paired = m.min(ms);
    let c: Vec<f64> = (0..m).map(|i| if i < paired { yvals[i].clamp(0.0, 1.0).sqrt() } else { 0.0 }).collect();
    let s: Vec<f64> = c.iter().map(|ci| (1.0 - ci * ci).max(0.0).sqrt()).collect();
    let mut st = PrincipalState {
        c,
        s,
        fp: vec![1.0; m],
        fq: vec![1.0; m],
        paired,
        lone_teachers: ms - paired,
        inv_m: 1.0 / m as f64,
        inv_ms: 1.0 / ms as f64,
    };

    let eta = cfg.step_size;
    let steps = cfg.steps(d);
    let zstar_norm = st.inv_ms.sqrt();
    let mut times = Vec::new();
    let mut losses = Vec::new();
    let mut trace_gaps = Vec::new();
    let mut phis = Vec::new();
    let mut overlaps = Vec::new();
    let mut guard = Guard { initial: 0.0 };
    let mut phi = 0.0;
    let mut prev_tau = 0.0;
    for n in 0..=steps {
        let (tau, z2, cross, loss) = st.observables();
        if n > 0 {
            phi += 0.5 * eta * (prev_tau + tau);
        }
        prev_tau = tau;
        guard.check(n, loss)?;
        if n % cfg.record_stride == 0 || n == steps {
            times.push(n as f64 * eta);
            losses.push(loss);
            trace_gaps.push(tau);
            phis.push(phi);
            let denom = z2.sqrt() * zstar_norm;
            overlaps.push(if denom > 0.0 { (cross / denom).min(1.0) } else { 0.0 });
        }
        if n == steps {
            break;
        }
        st.step(eta, tau);
    }

    // Back to the original coordinates: column i of W R is
    // p_i a_i + (fq_i / sqrt(m)) (u_i - c_i a_i), with u_i = U0 R e_i.
    let u_rot = u0.matrix() * &rot;
    let a_dirs = ustar.matrix() * (cmat.transpose() * &rot);
    let mut w_rot = DMatrix::zeros(d, m);
    let scale = st.inv_m.sqrt();
    for i in 0..m {
        let ui = u_rot.column(i);
        let mut col = ui * (st.fq[i] * scale);
        if i < paired && st.c[i] > 0.0 {
            let ai = a_dirs.column(i) / st.c[i];
            let (p, _) = st.coords(i);
            col += &ai * (p - st.fq[i] * scale * st.c[i]);
        }
        w_rot.set_column(i, &col);
    }
    let final_w = WeightMatrix::new(w_rot * rot.transpose())?;
    Ok(FlowTrajectory { d, times, losses, trace_gaps, phi: phis, overlaps, final_w })
}
