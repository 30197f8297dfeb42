use quadflow_core::fit::least_squares;
use quadflow_core::highdim::{
    density_histogram_compare, manova_density, overlap_gap_curve, overlap_limit_curve, solve_phi, solve_phi_with,
    BulkQuadrature, HighDimCurve, OdeScheme, SolveOptions, SpectralDensity,
};
use quadflow_core::sampling::{projection_product_spectrum, sample_stiefel, RngState};

const GRID: [f64; 3] = [0.25, 0.5, 0.75];
const REGIMES: [(f64, f64); 3] = [(0.5, 0.25), (0.5, 0.5), (0.25, 0.5)];

#[test]
fn measure_is_normalized_with_mean_alpha_star() {
    for a in GRID {
        for s in GRID {
            let d = manova_density(a, s).unwrap();
            let q = d.quadrature();
            let total = d.atom0 + d.atom1 + q.mass();
            let mean = d.atom1 + q.first_moment();
            assert!((total - 1.0).abs() <= 1e-6, "({a}, {s}) mass {total}");
            assert!((mean - s).abs() <= 1e-6, "({a}, {s}) mean {mean}");
            // Independent rule for the same mass.
            assert!((d.atom0 + d.atom1 + d.bulk_mass() - 1.0).abs() <= 1e-6);
            assert!(d.r_minus >= 0.0 && d.r_plus <= 1.0);
        }
    }
}

#[test]
fn invalid_ratios_are_rejected() {
    assert!(manova_density(0.0, 0.5).is_err());
    assert!(manova_density(0.5, 1.5).is_err());
    assert!(manova_density(f64::NAN, 0.5).is_err());
}

fn reference() -> (SpectralDensity, BulkQuadrature) {
    let d = manova_density(0.3, 0.5).unwrap();
    let q = d.quadrature();
    (d, q)
}

#[test]
fn theta_prime_matches_finite_differences() {
    for (a, s) in [(0.3, 0.5), (0.5, 0.5), (0.75, 0.5)] {
        let d = manova_density(a, s).unwrap();
        let q = d.quadrature();
        for u in [0.5, 5.0, 50.0] {
            let h = 1e-4 * (1.0 + u);
            let fd = (q.theta(u + h).unwrap() - q.theta(u - h).unwrap()) / (2.0 * h);
            let exact = d.theta_prime(u).unwrap();
            assert!(((fd - exact) / exact).abs() <= 1e-5, "({a}, {s}) u = {u}: {fd} vs {exact}");
        }
    }
}

#[test]
fn closed_form_and_quadrature_theta_prime_agree() {
    for a in GRID {
        for s in GRID {
            let d = manova_density(a, s).unwrap();
            let q = d.quadrature();
            for u in [-0.9, -0.5, 0.0, 0.3, 3.0, 30.0, 1e3, 1e6, 1e10] {
                let c = d.theta_prime(u).unwrap();
                let n = q.theta_prime(u).unwrap();
                assert!((c - n).abs() <= 1e-9 * c.abs().max(1e-3), "({a}, {s}) u = {u}: {c} vs {n}");
                assert!(c >= 0.0);
            }
        }
    }
}

#[test]
fn theta_vanishes_at_zero_and_rejects_small_u() {
    let (d, q) = reference();
    assert_eq!(q.theta(0.0).unwrap(), 0.0);
    assert!(q.theta(-1.0).is_err());
    assert!(d.theta_prime(-1.5).is_err());
}

#[test]
fn theta_quadrature_is_converged() {
    for (a, s) in [(0.3, 0.5), (0.5, 0.5)] {
        let d = manova_density(a, s).unwrap();
        let coarse = d.quadrature();
        let fine = BulkQuadrature::new(&d, 4 * coarse.len());
        for u in [0.5, 50.0, 1e6] {
            let diff = (coarse.theta(u).unwrap() - fine.theta(u).unwrap()).abs();
            assert!(diff <= 1e-7, "({a}, {s}) u = {u}: {diff:e}");
        }
    }
}

#[test]
fn theta_grows_logarithmically() {
    let (d, q) = reference();
    let slope = d.theta_log_slope();
    assert!((slope - 0.3).abs() < 1e-15);
    let u: f64 = 1e6;
    // Secant slope against log u over a decade around 1e6.
    let secant = (q.theta(10.0 * u).unwrap() - q.theta(u / 10.0).unwrap()) / 100f64.ln();
    assert!((secant / slope - 1.0).abs() <= 0.02, "{secant}");
    let local = u * d.theta_prime(u).unwrap();
    assert!((local / slope - 1.0).abs() <= 1e-4);
    // Theta(u) - slope log u settles to a constant, so Theta / log u drifts up slowly.
    let offset = |u: f64| q.theta(u).unwrap() - slope * u.ln();
    assert!((offset(1e6) - offset(1e12)).abs() <= 1e-5);
    assert!(q.theta(u).unwrap() / u.ln() < slope);
}

fn solve(a: f64, s: f64, gmax: f64) -> HighDimCurve {
    solve_phi(a, s, gmax, 2e-5).unwrap()
}

#[test]
fn solved_curves_satisfy_invariants() {
    for (a, s) in REGIMES {
        let c = solve(a, s, 3.0);
        assert_eq!(c.gamma[0], 0.0);
        assert_eq!((c.log_f[0], c.log_g[0]), (0.0, 0.0));
        assert!(c.phi[0].abs() < 1e-15);
        assert!(c.max_abs_residual() <= 1e-4, "({a}, {s}) residual {:e}", c.max_abs_residual());
        let lj = c.log_j();
        for i in 1..c.gamma.len() {
            assert!(c.log_f[i] >= c.log_f[i - 1]);
            assert!(c.log_g[i] >= c.log_g[i - 1]);
            assert!(lj[i] >= lj[i - 1] - 1e-15);
            assert!(lj[i] < 4.0 * c.gamma[i] / s);
            assert!(c.log_f[i] <= 4.0 * c.gamma[i] / a + 1e-12);
            assert!((0.0..=1.0).contains(&c.chi[i]));
        }
    }
}

#[test]
fn phi_regimes_have_the_expected_shape() {
    let inc = |c: &HighDimCurve, a: f64, b: f64| c.phi_at(b) - c.phi_at(a);
    let log_case = solve(0.5, 0.25, 6.0);
    assert!(inc(&log_case, 4.0, 6.0) > 0.0);
    assert!(inc(&log_case, 4.0, 6.0) < 0.6 * inc(&log_case, 1.0, 3.0));
    let lin_case = solve(0.25, 0.5, 6.0);
    let (l1, l2) = (inc(&lin_case, 2.0, 4.0), inc(&lin_case, 4.0, 6.0));
    assert!(((l2 - l1) / l1).abs() < 0.01);
    let bounded = solve(0.5, 0.5, 6.0);
    assert!(inc(&bounded, 4.0, 6.0).abs() < 1e-3);
}

#[test]
fn halving_the_step_changes_phi_little() {
    for (a, s) in REGIMES {
        let coarse = solve(a, s, 3.0);
        let fine = solve_phi(a, s, 3.0, 1e-5).unwrap();
        assert_eq!(coarse.gamma.len(), fine.gamma.len());
        let sup = coarse.phi.iter().zip(&fine.phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(sup <= 1e-3, "({a}, {s}) {sup:e}");
    }
}

#[test]
fn midpoint_scheme_agrees_with_euler() {
    let opts = SolveOptions { step: 1e-4, scheme: OdeScheme::Midpoint, record_every: 0.01 };
    for (a, s) in REGIMES {
        let mid = solve_phi_with(a, s, 3.0, &opts).unwrap();
        let euler = solve(a, s, 3.0);
        let sup = mid.phi.iter().zip(&euler.phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(sup <= 1e-3);
        assert!(mid.max_abs_residual() <= 1e-6);
    }
}

#[test]
fn overlap_curve_endpoints() {
    for (a, s) in REGIMES {
        let c = solve(a, s, 6.0);
        let d = manova_density(a, s).unwrap();
        let chi = overlap_limit_curve(&c, &d).unwrap();
        assert!((chi[0] / (a * s).sqrt() - 1.0).abs() <= 0.02);
        let target = (a / s).sqrt().min(1.0);
        assert!((chi.last().unwrap() / target - 1.0).abs() <= 0.02);
        assert!(overlap_limit_curve(&c, &manova_density(0.3, 0.3).unwrap()).is_err());
    }
}

/// Least-squares slope of `log(delta / weight(gamma))` against `x(gamma)`
/// over the final third of the curve.
fn tail_slope(c: &HighDimCurve, gap: &[f64], x: impl Fn(f64) -> f64, weight: impl Fn(f64) -> f64) -> f64 {
    let n = c.gamma.len();
    let lo = 2 * n / 3;
    let xs: Vec<f64> = c.gamma[lo..].iter().map(|&g| x(g)).collect();
    let ys: Vec<f64> = (lo..n).map(|i| (gap[i] / weight(c.gamma[i])).ln()).collect();
    least_squares(&xs, &ys).unwrap().0
}

#[test]
fn overlap_gap_decay_rates() {
    // alpha < alpha*: exponential with rate 4 / alpha*.
    let (a, s) = (0.25, 0.5);
    let c = solve(a, s, 6.0);
    let gap = overlap_gap_curve(&c, &manova_density(a, s).unwrap()).unwrap();
    let slope = tail_slope(&c, &gap, |g| g, |_| 1.0);
    assert!((slope / (-4.0 / s) - 1.0).abs() <= 0.15, "{slope}");

    // alpha > alpha*: gamma^{-2}.
    let (a, s) = (0.5, 0.25);
    let c = solve(a, s, 6.0);
    let gap = overlap_gap_curve(&c, &manova_density(a, s).unwrap()).unwrap();
    let slope = tail_slope(&c, &gap, f64::ln, |_| 1.0);
    assert!((slope / -2.0 - 1.0).abs() <= 0.15, "{slope}");

    // alpha = alpha*: sqrt(gamma) e^{-2 gamma / alpha*}.
    let (a, s) = (0.5, 0.5);
    let c = solve(a, s, 6.0);
    let gap = overlap_gap_curve(&c, &manova_density(a, s).unwrap()).unwrap();
    let slope = tail_slope(&c, &gap, |g| g, f64::sqrt);
    assert!((slope / (-2.0 / s) - 1.0).abs() <= 0.2, "{slope}");
}

#[test]
fn overlap_gap_agrees_with_direct_difference_early_on() {
    for (a, s) in REGIMES {
        let c = solve(a, s, 1.0);
        let d = manova_density(a, s).unwrap();
        let gap = overlap_gap_curve(&c, &d).unwrap();
        for (g, chi) in gap.iter().zip(&c.chi) {
            assert!((g - (d.limit_overlap() - chi)).abs() <= 1e-10);
        }
    }
}

#[test]
fn curve_csv_layout() {
    let c = solve(0.5, 0.25, 0.05);
    let csv = c.to_csv();
    assert!(csv.starts_with("gamma,F,G,J,phi,chi,residual\n"));
    assert_eq!(csv.lines().count(), c.gamma.len() + 1);
}

/// Quantile of the full measure by bisection on the CDF.
fn quantile(d: &SpectralDensity, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if d.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn inverse_cdf_samples_reproduce_the_histogram() {
    let d = manova_density(0.3, 0.5).unwrap();
    let mut prev = f64::INFINITY;
    for n in [200usize, 2000] {
        let eigs: Vec<f64> = (0..n).map(|i| quantile(&d, (i as f64 + 0.5) / n as f64)).collect();
        let rep = density_histogram_compare(&eigs, &d, 30).unwrap();
        assert!(rep.sup <= 2.0 / n as f64, "n = {n}: {}", rep.sup);
        assert!(rep.sup < prev);
        prev = rep.sup;
    }
}

#[test]
fn sampled_spectrum_matches_bulk() {
    let (dim, alpha, alphastar) = (1000, 0.3, 0.5);
    let d = manova_density(alpha, alphastar).unwrap();
    let mut rng = RngState::new(31);
    let u0 = sample_stiefel(dim, 300, &mut rng).unwrap();
    let us = sample_stiefel(dim, 500, &mut rng).unwrap();
    let eigs = projection_product_spectrum(&u0, &us).unwrap();
    let rep = density_histogram_compare(&eigs, &d, 30).unwrap();
    assert!(rep.sup <= 0.02, "{}", rep.sup);
    let total: f64 = rep.analytic.iter().sum();
    assert!((total - 1.0).abs() <= 1e-6);
}

#[test]
fn atom_at_one_has_the_predicted_weight() {
    let (dim, alpha, alphastar) = (400, 0.5, 0.75);
    let d = manova_density(alpha, alphastar).unwrap();
    let m = (alpha * dim as f64) as usize;
    let mut rng = RngState::new(41);
    let u0 = sample_stiefel(dim, m, &mut rng).unwrap();
    let us = sample_stiefel(dim, (alphastar * dim as f64) as usize, &mut rng).unwrap();
    let eigs = projection_product_spectrum(&u0, &us).unwrap();
    let frac = eigs.iter().filter(|v| **v > 1.0 - 1e-8).count() as f64 / m as f64;
    assert!((frac - d.atom1).abs() <= 2.0 / (m as f64).sqrt(), "{frac} vs {}", d.atom1);
}

#[test]
fn histogram_rejects_bad_input() {
    let d = manova_density(0.3, 0.5).unwrap();
    assert!(density_histogram_compare(&[], &d, 30).is_err());
    assert!(density_histogram_compare(&[0.5], &d, 0).is_err());
    assert!(density_histogram_compare(&[1.5], &d, 30).is_err());
    let rep = density_histogram_compare(&[0.1, 0.5], &d, 10).unwrap();
    assert!(rep.to_csv().starts_with("bin_lo,bin_hi,empirical,analytic,discrepancy\n"));
}
