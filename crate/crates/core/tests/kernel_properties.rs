mod common;

use common::bessel_i0_series;
use num_complex::Complex64;
use proptest::prelude::*;
use spatial_anc::geometry::Point;
use spatial_anc::kernel::{direction, gram_matrix, kappa, KernelInterpolator, KernelParams, Regularization};
use spatial_anc::linalg::{hermitian_eigenvalues, CVector};
use spatial_anc::scene::{benchmark_scene, greens_free_2d, Wavenumber};

#[test]
fn on_diagonal_value_is_modified_bessel() {
    let want = bessel_i0_series(6.0);
    for eta in [vec![1.0, 0.0], vec![0.0, -1.0], vec![0.6, 0.8]] {
        let p = KernelParams::new(6.0, eta, Regularization::default()).unwrap();
        let k = Wavenumber::new(250.0, 343.0).unwrap();
        let r = Point::new(-0.7, 0.3);
        let v = kappa(&p, &k, &r, &r).unwrap();
        assert!((v.re - want).abs() <= 1e-12 * want);
        assert_eq!(v.im, 0.0);
    }
}

fn point_strategy() -> impl Strategy<Value = Point> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn gram_matrix_is_positive_semidefinite(
        points in prop::collection::vec(point_strategy(), 6),
        f in 100.0..500.0f64,
        beta_idx in 0usize..3,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let beta = [0.0, 3.0, 6.0][beta_idx];
        let p = KernelParams::new(beta, vec![angle.cos(), angle.sin()], Regularization::default()).unwrap();
        let k = Wavenumber::new(f, 343.0).unwrap();
        let g = gram_matrix(&p, &k, &points).unwrap();
        prop_assert!((&g - g.adjoint()).norm() <= 1e-12 * g.norm());
        let ev = hermitian_eigenvalues(&g);
        let max = ev[ev.len() - 1];
        prop_assert!(ev[0] >= -1e-8 * max, "min eig {} max {}", ev[0], max);
    }

    #[test]
    fn kernel_is_lipschitz_under_small_shifts(
        a in point_strategy(),
        b in point_strategy(),
        f in 100.0..500.0f64,
        beta_idx in 0usize..3,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let beta = [0.0, 3.0, 6.0][beta_idx];
        let p = KernelParams::new(beta, vec![angle.cos(), angle.sin()], Regularization::default()).unwrap();
        let k = Wavenumber::new(f, 343.0).unwrap();
        let delta = 1e-6;
        let shifted = Point::new(b.x + delta * angle.sin(), b.y - delta * angle.cos());
        let v0 = kappa(&p, &k, &a, &b).unwrap();
        let v1 = kappa(&p, &k, &a, &shifted).unwrap();
        // |d/dr J0(sqrt(s))| = |J1(z)| k |k r12 - j beta eta| / |z| <= k I0(beta) (1 + beta / |z|)
        // bounded well inside k * I0(beta) * (1 + beta) on the sampled range.
        let bound = k.k * bessel_i0_series(beta) * (1.0 + beta) * 2.0;
        prop_assert!((v1 - v0).norm() <= bound * delta);
    }

    #[test]
    fn interpolation_reproduces_reference_observations(
        obs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 6),
        f in 100.0..500.0f64,
        beta_idx in 0usize..3,
    ) {
        let scene = benchmark_scene();
        let beta = [0.0, 3.0, 6.0][beta_idx];
        let eta = direction(&Point::ORIGIN, &scene.primary_sources[0]);
        let p = KernelParams::new(beta, eta, Regularization::Fixed(1e-12)).unwrap();
        let k = Wavenumber::new(f, 343.0).unwrap();
        let interp = KernelInterpolator::new(&p, &k, &scene.reference_mics).unwrap();
        let x = CVector::from_iterator(6, obs.iter().map(|&(re, im)| Complex64::new(re, im)));
        for (i, r) in scene.reference_mics.iter().enumerate() {
            let est = interp.estimate(r, &x).unwrap();
            prop_assert!((est - x[i]).norm() <= 1e-6 * x.norm(), "mic {i}: {est} vs {}", x[i]);
        }
    }
}

#[test]
fn field_estimate_at_center_is_sane() {
    let scene = benchmark_scene().without_scatterer();
    let k = scene.wavenumber(400.0).unwrap();
    let src = scene.primary_sources[0];
    let x = CVector::from_iterator(
        scene.num_reference(),
        scene.reference_mics.iter().map(|m| greens_free_2d(&k, m, &src).unwrap()),
    );
    let truth = greens_free_2d(&k, &Point::ORIGIN, &src).unwrap();
    for beta in [0.0, 6.0] {
        let eta = direction(&Point::ORIGIN, &src);
        let p = KernelParams::new(beta, eta, Regularization::default()).unwrap();
        let interp = KernelInterpolator::new(&p, &k, &scene.reference_mics).unwrap();
        let est = interp.estimate(&Point::ORIGIN, &x).unwrap();
        let rel = (est - truth).norm() / truth.norm();
        eprintln!("center estimate at 400 Hz, beta={beta}: relative error {rel:.3e}");
        if beta > 0.0 {
            assert!(rel < 1.0);
        }
    }
}
