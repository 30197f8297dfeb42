//! Late-time loss decay: `t^2 L(t)` levels off for `m > m*`, and `L(t)`
//! follows `exp(-4 mu t)` for `m = m* < d`.
//!
//! The teacher is `U* U*^T / m*` with a uniform frame, so `mu = 1 / m*`.
//! Students start from Gaussian weights.

use rayon::prelude::*;

use quadflow_core::fit::{final_decade, t2_loss_spread, tail_exponential_rate, LOSS_FLOOR};
use quadflow_core::flow::{integrate, FlowConfig, FlowTrajectory};
use quadflow_core::model::GramState;
use quadflow_core::sampling::{sample_gaussian_weights, sample_stiefel, RngState};
use quadflow_core::theory::RateClass;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::csv_table;
use crate::manifest::OutputDir;
use crate::plot::{Axes, LineStyle, Series};

pub const DEFAULT_D: usize = 100;
pub const POLY_HORIZON: f64 = 1000.0;
pub const EXP_HORIZON: f64 = 900.0;
/// Decades of loss above the floor used for exponential fits.
pub const FIT_DECADES: f64 = 3.0;

/// Teacher first, then the Gaussian student, from one seed.
pub fn rate_run(d: usize, m: usize, mstar: usize, seed: u64, eta: f64, horizon: f64) -> quadflow_core::Result<FlowTrajectory> {
    let mut rng = RngState::new(seed);
    let us = sample_stiefel(d, mstar, &mut rng)?;
    let zs = GramState::new(us.matrix() * us.matrix().transpose() / mstar as f64)?;
    let w0 = sample_gaussian_weights(d, m, &mut rng)?;
    let stride = ((1.0 / eta).round() as usize).max(1);
    integrate(&w0, &zs, &FlowConfig { step_size: eta, horizon, record_stride: stride, rescaled: false })
}

/// Smallest teacher eigenvalue of a projector teacher.
pub fn projector_mu(mstar: usize) -> f64 {
    1.0 / mstar as f64
}

/// Which decay law applies to `(m, m*, d)` with a projector teacher.
pub fn projector_class(m: usize, mstar: usize, d: usize) -> RateClass {
    let mu = projector_mu(mstar);
    if mstar >= d {
        RateClass::Exp8Mu { mu }
    } else if m == mstar {
        RateClass::Exp4Mu { mu }
    } else {
        RateClass::PolyInverseT2 { mu }
    }
}

/// Seed-averaged losses.
pub fn mean_losses(
    d: usize,
    m: usize,
    mstar: usize,
    seeds: &[u64],
    eta: f64,
    horizon: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let runs: Vec<quadflow_core::Result<FlowTrajectory>> =
        seeds.par_iter().map(|&s| rate_run(d, m, mstar, s, eta, horizon)).collect();
    let mut times = Vec::new();
    let mut mean: Vec<f64> = Vec::new();
    for run in runs {
        let run = run?;
        if mean.is_empty() {
            mean = vec![0.0; run.losses.len()];
            times = run.times.clone();
        }
        for (a, l) in mean.iter_mut().zip(&run.losses) {
            *a += l / seeds.len() as f64;
        }
    }
    Ok((times, mean))
}

/// `cst * exp(slope * t)` with `cst` fitted where the slope itself is fitted.
pub fn exponential_reference(times: &[f64], losses: &[f64], slope: f64) -> Vec<f64> {
    let end = losses.iter().position(|&l| !(l > LOSS_FLOOR)).unwrap_or(losses.len());
    let ceiling = LOSS_FLOOR * 10f64.powf(FIT_DECADES);
    let mut idx: Vec<usize> = (0..end).filter(|&i| losses[i] <= ceiling).collect();
    if idx.len() < 3 {
        let last = end.max(1) - 1;
        idx = final_decade(&times[..=last], times[last]);
    }
    let n = idx.len().max(1) as f64;
    let log_cst = idx.iter().map(|&i| losses[i].ln() - slope * times[i]).sum::<f64>() / n;
    times.iter().map(|&t| (log_cst + slope * t).exp()).collect()
}

fn panel(
    out: &mut OutputDir,
    d: usize,
    m: usize,
    mstar: usize,
    cfg: &ExperimentConfig,
) -> Result<String> {
    let class = projector_class(m, mstar, d);
    let horizon = cfg.horizon.unwrap_or(match class {
        RateClass::PolyInverseT2 { .. } => POLY_HORIZON,
        _ => EXP_HORIZON,
    });
    let (times, losses) = mean_losses(d, m, mstar, &cfg.seed_list(), cfg.eta, horizon)?;
    let name = format!("rates_d{d}_m{m}_ms{mstar}");
    match class.log_loss_slope() {
        None => {
            let t2l: Vec<f64> = times.iter().zip(&losses).map(|(t, l)| t * t * l).collect();
            out.write(&format!("{name}.csv"), &csv_table(&["t", "loss", "t2_loss"], &[&times, &losses, &t2l])?)?;
            let title = format!("t^2 L(t), d = {d}, m = {m}, m* = {mstar}");
            out.plot(
                &format!("{name}.svg"),
                &[Series::new("t^2 L(t)", times[1..].to_vec(), t2l[1..].to_vec())],
                &Axes::new(&title, "t", "t^2 L").log_x().log_y(),
            )?;
            let spread = t2_loss_spread(&times, &losses)?;
            Ok(format!("{name}: t^2 L spread over the final decade {spread:.3}"))
        }
        Some(slope) => {
            let reference = exponential_reference(&times, &losses, slope);
            out.write(&format!("{name}.csv"), &csv_table(&["t", "loss", "reference"], &[&times, &losses, &reference])?)?;
            let keep: Vec<usize> = (0..times.len()).filter(|&i| losses[i] > LOSS_FLOOR).collect();
            let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let title = format!("L(t), d = {d}, m = m* = {m}");
            out.plot(
                &format!("{name}.svg"),
                &[
                    Series::new("L(t)", pick(&times), pick(&losses)),
                    Series::new(format!("cst exp({slope:.3} t)"), pick(&times), pick(&reference)).styled(LineStyle::Dashed),
                ],
                &Axes::new(&title, "t", "loss").log_y(),
            )?;
            let fitted = tail_exponential_rate(&times, &losses, FIT_DECADES)?;
            Ok(format!("{name}: fitted log-loss slope {fitted:.4}, predicted {slope:.4}"))
        }
    }
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for d in cfg.dims(&[DEFAULT_D]) {
        let cases = match (cfg.m, cfg.m_star) {
            (Some(m), Some(ms)) => vec![(m, ms)],
            _ => vec![(d / 2, d / 4), (d / 2, d / 2)],
        };
        for (m, ms) in cases {
            if m < ms.min(d) || ms > d || m > d {
                return Err(quadflow_core::Error::OutOfScope(format!(
                    "(m, m*, d) = ({m}, {ms}, {d}) is underparameterized or inconsistent"
                ))
                .into());
            }
            lines.push(panel(out, d, m, ms, cfg)?);
        }
    }
    Ok(lines)
}
