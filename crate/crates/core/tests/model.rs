use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use quadflow_core::model::{
    loss_gradient, overlap, overlap_matrices, population_loss, predict, DataPoint, GramState, WeightMatrix,
};
use quadflow_core::sampling::{sample_gaussian_weights, sample_stiefel, RngState};

fn random_teacher(d: usize, mstar: usize, rng: &mut RngState) -> GramState {
    sample_gaussian_weights(d, mstar, rng).unwrap().gram().unwrap()
}

/// Central differences of the population loss, entry by entry.
fn finite_difference(w: &WeightMatrix, zstar: &GramState, h: f64) -> DMatrix<f64> {
    let base = w.entries().clone();
    DMatrix::from_fn(base.nrows(), base.ncols(), |i, j| {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[(i, j)] += h;
        minus[(i, j)] -= h;
        let lp = population_loss(&WeightMatrix::new(plus).unwrap(), zstar).unwrap();
        let lm = population_loss(&WeightMatrix::new(minus).unwrap(), zstar).unwrap();
        (lp - lm) / (2.0 * h)
    })
}

#[test]
fn gradient_matches_finite_differences_on_fifty_instances() {
    for seed in 0..50u64 {
        let mut rng = RngState::new(seed);
        let d = 2 + (seed as usize % 9);
        let m = 1 + (seed as usize % 5);
        let mstar = 1 + ((seed as usize / 5) % 5);
        let zstar = random_teacher(d, mstar, &mut rng);
        let w = sample_gaussian_weights(d, m, &mut rng).unwrap();
        let g = loss_gradient(&w, &zstar).unwrap();
        let fd = finite_difference(&w, &zstar, 1e-6);
        let rel = (&g - &fd).norm() / g.norm();
        assert!(rel <= 1e-5, "seed {seed}: relative error {rel:e}");
    }
}

#[test]
fn gradient_check_reference_shape() {
    let mut rng = RngState::new(11);
    let zstar = random_teacher(8, 2, &mut rng);
    let w = sample_gaussian_weights(8, 3, &mut rng).unwrap();
    let g = loss_gradient(&w, &zstar).unwrap();
    let fd = finite_difference(&w, &zstar, 1e-6);
    assert!((&g - &fd).norm() / g.norm() <= 1e-5);
}

#[test]
fn gradient_vanishes_at_optimum() {
    let mut rng = RngState::new(2);
    let w = sample_gaussian_weights(6, 3, &mut rng).unwrap();
    let zstar = w.gram().unwrap();
    assert!(loss_gradient(&w, &zstar).unwrap().norm() < 1e-14);
    assert!(population_loss(&w, &zstar).unwrap() < 1e-28);
}

#[test]
fn loss_agrees_with_gaussian_expectation() {
    // L = 1/4 E[(x^T Delta x)^2] for x ~ N(0, I_d).
    let mut rng = RngState::new(5);
    let d = 5;
    let zstar = random_teacher(d, 2, &mut rng);
    let w = sample_gaussian_weights(d, 3, &mut rng).unwrap();
    let delta = w.gram_matrix() - zstar.matrix();
    let exact = population_loss(&w, &zstar).unwrap();
    let n = 1_000_000usize;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let x = DVector::from_fn(d, |_, _| rng.normal());
        let q = x.dot(&(&delta * &x));
        let v = 0.25 * q * q;
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / n as f64;
    let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - exact).abs() <= 3.0 * se, "MC {mean} vs {exact} (se {se})");
}

#[test]
fn predictor_is_quadratic_form() {
    let mut rng = RngState::new(9);
    let w = sample_gaussian_weights(7, 4, &mut rng).unwrap();
    let x = DVector::from_fn(7, |_, _| rng.normal());
    let direct = (w.entries().transpose() * &x).norm_squared();
    let trace = (&x * x.transpose() * w.gram_matrix()).trace();
    let p = predict(&w, &DataPoint::new(x).unwrap()).unwrap();
    assert!((p - direct).abs() <= 1e-10 * direct.max(1.0));
    assert!((p - trace).abs() <= 1e-12 * trace.abs().max(1.0) * 10.0);
}

#[test]
fn predictor_rejects_mismatched_input() {
    let w = WeightMatrix::new(DMatrix::zeros(3, 2)).unwrap();
    assert!(predict(&w, &DataPoint::new(DVector::zeros(4)).unwrap()).is_err());
}

#[test]
fn orthonormal_initial_loss_bound() {
    for seed in 0..5u64 {
        let mut rng = RngState::new(seed);
        let (d, m, mstar) = (40, 12, 7);
        let u0 = sample_stiefel(d, m, &mut rng).unwrap();
        let us = sample_stiefel(d, mstar, &mut rng).unwrap();
        let zstar = us.to_weights().gram().unwrap();
        let loss = population_loss(&u0.to_weights(), &zstar).unwrap();
        assert!(loss <= 0.5 * (1.0 / m as f64 + 1.0 / mstar as f64));
    }
}

#[test]
fn rank_one_overlap_is_squared_cosine() {
    let mut rng = RngState::new(4);
    let x = DVector::from_fn(6, |_, _| rng.normal());
    let y = DVector::from_fn(6, |_, _| rng.normal());
    let chi = overlap_matrices(&(&x * x.transpose()), &(&y * y.transpose())).unwrap();
    let cos2 = x.dot(&y).powi(2) / (x.norm_squared() * y.norm_squared());
    assert!((chi - cos2).abs() < 1e-12);
}

#[test]
fn random_projections_overlap_near_root_product() {
    for (alpha, alphastar) in [(0.25, 0.25), (0.5, 0.25), (0.3, 0.5)] {
        let d = 1000;
        let mut rng = RngState::new(17);
        let u0 = sample_stiefel(d, (alpha * d as f64) as usize, &mut rng).unwrap();
        let us = sample_stiefel(d, (alphastar * d as f64) as usize, &mut rng).unwrap();
        let chi = overlap(&u0.to_weights().gram().unwrap(), &us.to_weights().gram().unwrap()).unwrap();
        assert!((chi - f64::sqrt(alpha * alphastar)).abs() <= 0.02, "({alpha}, {alphastar}): {chi}");
    }
}

#[test]
fn overlap_rejects_zero() {
    let z = DMatrix::zeros(3, 3);
    assert!(overlap_matrices(&z, &DMatrix::identity(3, 3)).is_err());
}

fn psd(seed: u64, d: usize, k: usize) -> DMatrix<f64> {
    let mut rng = RngState::new(seed);
    let a = rng.normal_matrix(d, k);
    &a * a.transpose()
}

proptest! {
    #[test]
    fn overlap_is_symmetric_and_bounded(s1 in 0u64..1000, s2 in 1000u64..2000, d in 2usize..8, k in 1usize..4) {
        let (a, b) = (psd(s1, d, k), psd(s2, d, k));
        let ab = overlap_matrices(&a, &b).unwrap();
        let ba = overlap_matrices(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn overlap_is_scale_invariant(s1 in 0u64..1000, s2 in 1000u64..2000, c in 1e-3f64..1e3, d in 2usize..8) {
        let (a, b) = (psd(s1, d, 2), psd(s2, d, 3));
        let base = overlap_matrices(&a, &b).unwrap();
        let scaled = overlap_matrices(&(a * c), &b).unwrap();
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn self_overlap_is_one(s in 0u64..1000, d in 1usize..8, k in 1usize..4) {
        let a = psd(s, d, k);
        prop_assert!((overlap_matrices(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_is_non_negative(s in 0u64..1000, d in 1usize..8, m in 1usize..5, ms in 1usize..5) {
        let mut rng = RngState::new(s);
        let zstar = random_teacher(d, ms, &mut rng);
        let w = sample_gaussian_weights(d, m, &mut rng).unwrap();
        prop_assert!(population_loss(&w, &zstar).unwrap() >= 0.0);
    }

    #[test]
    fn gram_state_reconstructs(s in 0u64..1000, d in 1usize..9, k in 1usize..5) {
        let a = psd(s, d, k);
        let g = GramState::new(a.clone()).unwrap();
        let v = g.eigenvectors();
        let rec = v * DMatrix::from_diagonal(g.eigenvalues()) * v.transpose();
        prop_assert!((rec - &a).norm() <= 1e-8 * a.norm().max(1e-300));
        for w in g.eigenvalues().as_slice().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }
}
