use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_anc::geometry::{Disk, Point};
use spatial_anc::scene::{
    benchmark_scene, greens_free_2d, pressure_true, transfer_matrix_g, FieldSolver, Wavenumber,
};

#[test]
fn greens_function_satisfies_helmholtz() {
    let h = 1e-3;
    let src = Point::new(0.1, -0.3);
    for &f in &[100.0, 400.0, 500.0] {
        let k = Wavenumber::new(f, 343.0).unwrap();
        for r in [Point::new(0.6, 0.2), Point::new(-1.2, 0.8), Point::new(2.5, -1.0)] {
            let g = |p: Point| greens_free_2d(&k, &p, &src).unwrap();
            let c = g(r);
            let lap = (g(Point::new(r.x + h, r.y))
                + g(Point::new(r.x - h, r.y))
                + g(Point::new(r.x, r.y + h))
                + g(Point::new(r.x, r.y - h))
                - 4.0 * c)
                / (h * h);
            let residual = (lap + k.k * k.k * c).norm();
            assert!(
                residual <= 1e-3 * k.k * k.k * c.norm(),
                "f={f} r={r:?}: residual {residual:e}"
            );
        }
    }
}

#[test]
fn rigid_scatterer_neumann_condition() {
    let scene = benchmark_scene();
    let s = scene.scatterer.unwrap();
    let h = 1e-4;
    for &f in &[100.0, 400.0, 500.0] {
        let k = scene.wavenumber(f).unwrap();
        let solver = FieldSolver::new(&scene, k).unwrap();
        for src in [scene.primary_sources[0], scene.secondary_sources[3]] {
            let mut max_p: f64 = 0.0;
            let mut max_dp: f64 = 0.0;
            for i in 0..64 {
                let theta = 2.0 * PI * i as f64 / 64.0;
                let at = |rho: f64| s.center.add(&Point::from_polar(rho, theta));
                let outer = solver.pressure_unchecked(&src, &at(s.radius + h)).unwrap();
                let inner = solver.pressure_unchecked(&src, &at(s.radius - h)).unwrap();
                let dp = (outer - inner) / (2.0 * h);
                max_dp = max_dp.max(dp.norm());
                max_p = max_p.max(solver.pressure(&src, &at(s.radius + 1e-12)).unwrap().norm());
            }
            assert!(
                max_dp <= 1e-4 * k.k * max_p,
                "f={f}: radial derivative {max_dp:e} vs k|p| {:e}",
                k.k * max_p
            );
            // Without the scattered field the incident derivative is clearly nonzero.
            let free = scene.without_scatterer();
            let incident = FieldSolver::new(&free, k).unwrap();
            let at = |rho: f64| s.center.add(&Point::from_polar(rho, PI));
            let d_inc = (incident.pressure(&src, &at(s.radius + h)).unwrap()
                - incident.pressure(&src, &at(s.radius - h)).unwrap())
                / (2.0 * h);
            assert!(d_inc.norm() > 1e-2 * k.k * max_p);
        }
    }
}

fn random_outside(rng: &mut ChaCha8Rng, s: &Disk) -> Point {
    loop {
        let p = Point::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
        if p.distance(&s.center) > s.radius + 0.05 {
            return p;
        }
    }
}

#[test]
fn reciprocity_with_scatterer() {
    let scene = benchmark_scene();
    let s = scene.scatterer.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &f in &[120.0, 333.0, 500.0] {
        let k = scene.wavenumber(f).unwrap();
        let solver = FieldSolver::new(&scene, k).unwrap();
        for _ in 0..40 {
            let a = random_outside(&mut rng, &s);
            let b = random_outside(&mut rng, &s);
            if a.distance(&b) < 1e-3 {
                continue;
            }
            let ab = solver.pressure(&a, &b).unwrap();
            let ba = solver.pressure(&b, &a).unwrap();
            assert!((ab - ba).norm() <= 1e-8 * ab.norm(), "f={f} a={a:?} b={b:?}");
        }
    }
}

#[test]
fn series_tail_beyond_adaptive_order_is_negligible() {
    let scene = benchmark_scene();
    let s = scene.scatterer.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &f in &[100.0, 400.0, 500.0] {
        let k = scene.wavenumber(f).unwrap();
        let solver = FieldSolver::new(&scene, k).unwrap();
        for _ in 0..20 {
            let src = random_outside(&mut rng, &s);
            let r = random_outside(&mut rng, &s);
            let p = solver.pressure(&src, &r).unwrap();
            let n = solver.initial_order(&r);
            let incident = greens_free_2d(&k, &r, &src).unwrap();
            let longer = incident + solver.scattered_fixed_order(&src, &r, n + 10).unwrap();
            assert!((p - longer).norm() <= 1e-8 * p.norm());
        }
    }
}

#[test]
fn vanishing_scatterer_leaves_free_field() {
    let mut scene = benchmark_scene();
    scene.scatterer = Some(Disk::new(Point::ORIGIN, 1e-4));
    let free = scene.without_scatterer();
    let k = scene.wavenumber(400.0).unwrap();
    let with = FieldSolver::new(&scene, k).unwrap();
    let without = FieldSolver::new(&free, k).unwrap();
    let mics: Vec<Point> = scene.reference_mics.iter().chain(&scene.error_mics).copied().collect();
    for src in scene.primary_sources.iter().chain(&scene.secondary_sources) {
        for mic in &mics {
            let a = with.pressure(src, mic).unwrap();
            let b = without.pressure(src, mic).unwrap();
            assert!((a - b).norm() <= 1e-3 * b.norm());
        }
    }
}

#[test]
fn true_secondary_path_differs_from_free_field_model() {
    let scene = benchmark_scene();
    let k = scene.wavenumber(400.0).unwrap();
    let g_true = transfer_matrix_g(&scene, &k).unwrap();
    let g_free = transfer_matrix_g(&scene.without_scatterer(), &k).unwrap();
    let mismatch = (&g_true - &g_free).norm() / g_free.norm();
    assert!(mismatch > 1e-2, "mismatch {mismatch}");
}

#[test]
fn transfer_matrix_mirror_symmetry() {
    // Source on the x-axis keeps the layout symmetric about both axes.
    let scene = benchmark_scene();
    let k = scene.wavenumber(400.0).unwrap();
    let g = transfer_matrix_g(&scene, &k).unwrap();
    let l = scene.num_secondary();
    let tol = 1e-10 * g.norm();
    for j in 0..l {
        // reflection about the x-axis: angle θ -> -θ, each mic maps to itself
        let mirror_x = (l - j) % l;
        // reflection about the y-axis: θ -> π - θ, mics swap
        let mirror_y = (l / 2 + l - j) % l;
        for m in 0..2 {
            assert!((g[(m, j)] - g[(m, mirror_x)]).norm() < tol);
            assert!((g[(m, j)] - g[(1 - m, mirror_y)]).norm() < tol);
        }
    }
}

#[test]
fn scattered_field_conjugates_with_convention() {
    let scene = benchmark_scene();
    let mut neg = scene.clone();
    neg.convention = spatial_anc::scene::TimeConvention::Negative;
    let k = scene.wavenumber(410.0).unwrap();
    let src = scene.secondary_sources[5];
    let r = Point::new(0.2, 0.17);
    let a = pressure_true(&scene, &k, &src, &r).unwrap();
    let b = pressure_true(&neg, &k, &src, &r).unwrap();
    assert_eq!(a.conj(), b);
    assert!(a != Complex64::new(0.0, 0.0));
}
