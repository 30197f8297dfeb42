use nalgebra::DMatrix;
use quadflow_core::flow::{integrate, FlowConfig};
use quadflow_core::implicit::{
    check_self_consistency, comparison_csv, evolve_implicit, evolve_implicit_state, ImplicitConfig, ImplicitState,
};
use quadflow_core::model::{GramState, WeightMatrix};
use quadflow_core::sampling::{sample_gaussian_weights, sample_stiefel, RngState};
use quadflow_core::Error;

fn instance(seed: u64, d: usize, m: usize, mstar: usize) -> (WeightMatrix, GramState) {
    let mut rng = RngState::new(seed);
    let zstar = sample_gaussian_weights(d, mstar, &mut rng).unwrap().gram().unwrap();
    (sample_gaussian_weights(d, m, &mut rng).unwrap(), zstar)
}

/// Dense descent sampled at every multiple of `every` up to `horizon`.
fn flow_grams(w0: &WeightMatrix, zstar: &GramState, eta: f64, every: f64, horizon: f64) -> Vec<DMatrix<f64>> {
    let mut out = vec![w0.gram_matrix()];
    let mut w = w0.clone();
    let chunks = (horizon / every).round() as usize;
    for _ in 0..chunks {
        let c = FlowConfig { step_size: eta, horizon: every, record_stride: usize::MAX, rescaled: false };
        w = integrate(&w, zstar, &c).unwrap().final_w;
        out.push(w.gram_matrix());
    }
    out
}

#[test]
fn initial_state_reproduces_w0() {
    let (w0, zstar) = instance(1, 8, 3, 2);
    let s = evolve_implicit(&w0, &zstar, &ImplicitConfig { horizon: 0.0, ..ImplicitConfig::default() }).unwrap();
    assert_eq!(s.len(), 1);
    assert!((&s[0].z - w0.gram_matrix()).norm() <= 1e-15);
    assert_eq!(s[0].psi, 0.0);
    let state = ImplicitState::new(&w0, &zstar).unwrap();
    assert_eq!(check_self_consistency(&state).unwrap(), 0.0);
}

#[test]
fn implicit_solution_tracks_fine_step_descent() {
    for seed in 0..10u64 {
        let (w0, zstar) = instance(100 + seed, 10, 3, 3);
        let cfg = ImplicitConfig { horizon: 10.0, dt: 1e-3, record_stride: 500, residual_tolerance: 1e-6 };
        let samples = evolve_implicit(&w0, &zstar, &cfg).unwrap();
        let reference = flow_grams(&w0, &zstar, 1e-4, 0.5, 10.0);
        assert_eq!(samples.len(), reference.len());
        for (s, z) in samples.iter().zip(&reference) {
            let dist = (&s.z - z).norm();
            assert!(dist <= 1e-3, "seed {seed}, t = {}: {dist:e}", s.t);
            assert!(s.residual <= 1e-6);
        }
    }
}

#[test]
fn psi_grows_like_teacher_trace() {
    let mut rng = RngState::new(7);
    let d = 10;
    let us = sample_stiefel(d, 3, &mut rng).unwrap();
    let zstar = us.to_weights().gram().unwrap();
    let w0 = sample_gaussian_weights(d, 3, &mut rng).unwrap();
    let cfg = ImplicitConfig { horizon: 50.0, dt: 1e-3, record_stride: 1000, residual_tolerance: 1e-6 };
    let (_, state) = evolve_implicit_state(&w0, &zstar, &cfg).unwrap();
    let ratio = state.psi / 50.0 / zstar.trace();
    assert!((ratio - 1.0).abs() <= 0.02, "{ratio}");
}

#[test]
fn assembled_gram_is_symmetric_psd_full_rank() {
    let (w0, zstar) = instance(3, 9, 4, 2);
    let cfg = ImplicitConfig { horizon: 20.0, dt: 1e-3, record_stride: 1000, residual_tolerance: 1e-6 };
    for s in evolve_implicit(&w0, &zstar, &cfg).unwrap() {
        let z = &s.z;
        assert!((z - z.transpose()).norm() <= 1e-10 * z.norm());
        let eig = z.clone().symmetric_eigenvalues();
        assert!(eig.iter().all(|v| *v >= -1e-10));
        let positive = eig.iter().filter(|v| **v > 1e-12 * z.norm()).count();
        assert_eq!(positive, 4);
    }
}

#[test]
fn accumulator_is_symmetric_psd() {
    let (w0, zstar) = instance(4, 7, 3, 2);
    let cfg = ImplicitConfig { horizon: 2.0, dt: 1e-3, record_stride: 1000, residual_tolerance: 1e-6 };
    let (_, state) = evolve_implicit_state(&w0, &zstar, &cfg).unwrap();
    let a = state.accumulator();
    assert!((&a - a.transpose()).norm() <= 1e-12 * a.norm());
    assert!(a.symmetric_eigenvalues().iter().all(|v| *v >= -1e-10));
}

#[test]
fn perturbed_psi_trips_the_residual_check() {
    let (w0, zstar) = instance(5, 8, 3, 3);
    let cfg = ImplicitConfig { horizon: 1.0, dt: 1e-3, record_stride: 100, residual_tolerance: 1e-6 };
    let (_, mut state) = evolve_implicit_state(&w0, &zstar, &cfg).unwrap();
    assert!(check_self_consistency(&state).unwrap() <= 1e-6);
    state.perturb_psi(1e-3);
    assert!(check_self_consistency(&state).unwrap() > 1e-6);
}

#[test]
fn tight_tolerance_surfaces_a_breach() {
    let (w0, zstar) = instance(6, 8, 3, 3);
    let cfg = ImplicitConfig { horizon: 2.0, dt: 1e-2, record_stride: 10, residual_tolerance: 1e-14 };
    assert!(matches!(evolve_implicit(&w0, &zstar, &cfg), Err(Error::ResidualBreach { .. })));
}

#[test]
fn comparison_csv_layout() {
    let (w0, zstar) = instance(7, 5, 2, 2);
    let cfg = ImplicitConfig { horizon: 0.1, dt: 1e-3, record_stride: 50, residual_tolerance: 1e-6 };
    let s = evolve_implicit(&w0, &zstar, &cfg).unwrap();
    let csv = comparison_csv(&s, &vec![0.0; s.len()]);
    assert!(csv.starts_with("t,psi,residual,dist_to_flow\n"));
    assert_eq!(csv.lines().count(), s.len() + 1);
}
