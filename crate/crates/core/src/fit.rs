//! Least-squares slopes and window selection for decay-rate estimates.

use crate::error::{Error, Result};

/// Losses at or below this value are treated as numerical floor.
pub const LOSS_FLOOR: f64 = 1e-24;

/// Ordinary least-squares fit `y = slope * x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput("need at least two points for a slope"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Indices of the samples with `t` in `[t_end / 10, t_end]`.
pub fn final_decade(times: &[f64], t_end: f64) -> Vec<usize> {
    times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t_end / 10.0 && t <= t_end)
        .map(|(i, _)| i)
        .collect()
}

/// Slope of `log L` against `t` over the final decade of times before the loss
/// first reaches [`LOSS_FLOOR`].
pub fn exponential_rate(times: &[f64], losses: &[f64]) -> Result<f64> {
    let last = losses
        .iter()
        .position(|&l| !(l > LOSS_FLOOR))
        .unwrap_or(losses.len())
        .checked_sub(1)
        .ok_or(Error::EmptyInput("no loss sample above the floor"))?;
    let idx = final_decade(&times[..=last], times[last]);
    let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| losses[i].ln()).collect();
    Ok(least_squares(&xs, &ys)?.0)
}

/// Slope of `log L` against `t` over the samples before the floor whose loss
/// lies within `decades` orders of magnitude above [`LOSS_FLOOR`]. A plateau
/// before the exponential phase cannot enter this window. Falls back to
/// [`exponential_rate`] when fewer than three samples qualify.
pub fn tail_exponential_rate(times: &[f64], losses: &[f64], decades: f64) -> Result<f64> {
    if times.len() != losses.len() {
        return Err(Error::DimensionMismatch(format!("{} times, {} losses", times.len(), losses.len())));
    }
    let end = losses.iter().position(|&l| !(l > LOSS_FLOOR)).unwrap_or(losses.len());
    let ceiling = LOSS_FLOOR * 10f64.powf(decades);
    let idx: Vec<usize> = (0..end).filter(|&i| losses[i] <= ceiling).collect();
    if idx.len() < 3 {
        return exponential_rate(times, losses);
    }
    let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| losses[i].ln()).collect();
    Ok(least_squares(&xs, &ys)?.0)
}

/// `max / min` of `t^2 L(t)` over the final decade of recorded times.
pub fn t2_loss_spread(times: &[f64], losses: &[f64]) -> Result<f64> {
    let t_end = *times.last().ok_or(Error::EmptyInput("no samples"))?;
    let vals: Vec<f64> = final_decade(times, t_end).iter().map(|&i| times[i] * times[i] * losses[i]).collect();
    if vals.is_empty() {
        return Err(Error::EmptyInput("no samples in the final decade"));
    }
    let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
    Ok(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -3.0 * x + 2.0).collect();
        let (s, c) = least_squares(&xs, &ys).unwrap();
        assert!((s + 3.0).abs() < 1e-12 && (c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_rate_stops_at_floor() {
        let ts: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
        let ls: Vec<f64> = ts.iter().map(|t| (-0.8 * t).exp().max(1e-30)).collect();
        assert!((exponential_rate(&ts, &ls).unwrap() + 0.8).abs() < 1e-9);
    }

    #[test]
    fn tail_rate_ignores_an_initial_plateau() {
        let ts: Vec<f64> = (0..=400).map(|i| i as f64).collect();
        let ls: Vec<f64> = ts.iter().map(|&t| if t < 100.0 { 1e-3 } else { (1e-3 * (-0.2 * (t - 100.0)).exp()).max(1e-29) }).collect();
        assert!((exponential_rate(&ts, &ls).unwrap() + 0.2).abs() > 0.02);
        assert!((tail_exponential_rate(&ts, &ls, 3.0).unwrap() + 0.2).abs() < 1e-9);
    }

    #[test]
    fn tail_rate_falls_back_without_a_tail() {
        let ts: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let ls: Vec<f64> = ts.iter().map(|t| (-0.1 * t).exp()).collect();
        assert!((tail_exponential_rate(&ts, &ls, 3.0).unwrap() + 0.1).abs() < 1e-9);
    }

    #[test]
    fn inverse_square_spread_is_one() {
        let ts: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let ls: Vec<f64> = ts.iter().map(|t| 5.0 / (t * t)).collect();
        assert!((t2_loss_spread(&ts, &ls).unwrap() - 1.0).abs() < 1e-12);
    }
}
