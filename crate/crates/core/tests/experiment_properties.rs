use num_complex::Complex64;
use spatial_anc::control::{Algorithm, StepParams};
use spatial_anc::experiment::{
    evaluate_field, frequency_rng, observe, run, ExperimentConfig, FieldEvaluator, NlmsInit, Observer, PRED_FLOOR_DB,
};
use spatial_anc::kernel::{direction, KernelParams, Regularization};
use spatial_anc::linalg::CVector;
use spatial_anc::quadrature::{make_grid, GridScheme};
use spatial_anc::scene::{benchmark_scene, pressure_true, FieldSolver, TimeConvention};

fn config(iterations: usize) -> ExperimentConfig {
    let scene = benchmark_scene();
    let eta = direction(&scene.target_region.center, &scene.primary_sources[0]);
    ExperimentConfig {
        kernel: KernelParams::new(6.0, eta, Regularization::default()).unwrap(),
        scene,
        frequencies: vec![400.0],
        iterations,
        snr_db: 40.0,
        algorithms: Algorithm::ALL.to_vec(),
        step: StepParams::default(),
        grid: GridScheme::Lattice { spacing: 0.05 },
        eval_grid: None,
        map_grid: GridScheme::Lattice { spacing: 0.05 },
        seed: 17,
        nlms_init: NlmsInit::Zero,
        checkpoints: vec![],
    }
}

#[test]
fn noiseless_observation_is_true_pressure() {
    let scene = benchmark_scene();
    let k = scene.wavenumber(300.0).unwrap();
    let mut rng = frequency_rng(1, 300.0);
    let (x, d) = observe(&scene, &k, &mut rng, f64::INFINITY).unwrap();
    for (i, m) in scene.reference_mics.iter().enumerate() {
        assert_eq!(x[i], pressure_true(&scene, &k, &scene.primary_sources[0], m).unwrap());
    }
    for (i, m) in scene.error_mics.iter().enumerate() {
        assert_eq!(d[i], pressure_true(&scene, &k, &scene.primary_sources[0], m).unwrap());
    }
}

#[test]
fn empirical_snr_matches_target() {
    let scene = benchmark_scene();
    let k = scene.wavenumber(400.0).unwrap();
    let solver = FieldSolver::new(&scene, k).unwrap();
    let obs = Observer::new(&solver, 40.0).unwrap();
    let mut rng = frequency_rng(7, 400.0);
    let draws = 100_000;
    let (mut nx, mut nd) = (0.0, 0.0);
    for _ in 0..draws {
        let (x, d) = obs.observe(&mut rng);
        nx += (&x - &obs.x_clean).norm_squared();
        nd += (&d - &obs.d_clean).norm_squared();
    }
    for (noise, clean) in [(nx, &obs.x_clean), (nd, &obs.d_clean)] {
        let snr = 10.0 * (clean.norm_squared() * draws as f64 / noise).log10();
        assert!((snr - 40.0).abs() <= 0.2, "empirical SNR {snr}");
    }
}

#[test]
fn seeded_noise_is_reproducible() {
    let scene = benchmark_scene();
    let k = scene.wavenumber(250.0).unwrap();
    let draw = || {
        let mut rng = frequency_rng(42, 250.0);
        (0..5).map(|_| observe(&scene, &k, &mut rng, 40.0).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
    let mut other = frequency_rng(43, 250.0);
    assert_ne!(draw()[0], observe(&scene, &k, &mut other, 40.0).unwrap());
}

#[test]
fn zero_drive_gives_zero_reduction() {
    let scene = benchmark_scene();
    let k = scene.wavenumber(400.0).unwrap();
    let grid = make_grid(&scene.target_region, scene.scatterer.as_ref(), 0.05).unwrap();
    let (p, map) = evaluate_field(&scene, &k, &CVector::zeros(12), &grid).unwrap();
    assert_eq!(p, 0.0);
    assert_eq!(map.values.len(), grid.len());
}

#[test]
fn perfect_cancellation_hits_the_floor() {
    let mut scene = benchmark_scene();
    // A loudspeaker co-located with the noise source can cancel it exactly.
    scene.secondary_sources = vec![scene.primary_sources[0]];
    let k = scene.wavenumber(400.0).unwrap();
    let solver = FieldSolver::new(&scene, k).unwrap();
    let grid = make_grid(&scene.target_region, scene.scatterer.as_ref(), 0.05).unwrap();
    let eval = FieldEvaluator::new(&solver, &grid.points).unwrap();
    let y = CVector::from_element(1, Complex64::new(-1.0, 0.0));
    assert_eq!(eval.reduction_db(&y), PRED_FLOOR_DB);
}

#[test]
fn overdriving_is_penalized() {
    let scene = benchmark_scene();
    let k = scene.wavenumber(400.0).unwrap();
    let solver = FieldSolver::new(&scene, k).unwrap();
    let grid = make_grid(&scene.target_region, scene.scatterer.as_ref(), 0.05).unwrap();
    let eval = FieldEvaluator::new(&solver, &grid.points).unwrap();
    let y = CVector::from_fn(12, |i, _| Complex64::new((i as f64).cos(), (i as f64).sin()));
    let mut last = eval.reduction_db(&y);
    for scale in [10.0, 100.0, 1000.0] {
        let p = eval.reduction_db(&(&y * Complex64::new(scale, 0.0)));
        assert!(p > last);
        last = p;
    }
}

#[test]
fn zero_initialized_nlms_starts_at_zero_db() {
    let mut c = config(1);
    c.algorithms = vec![Algorithm::Nlms];
    let r = run(&c).unwrap();
    let t = &r.succeeded().next().unwrap().runs[0].trajectory;
    assert_eq!(t, &vec![0.0]);
}

#[test]
fn fixed_filter_trajectory_is_flat() {
    let mut c = config(300);
    c.algorithms = vec![Algorithm::FixedKir];
    let r = run(&c).unwrap();
    let t = &r.succeeded().next().unwrap().runs[0].trajectory;
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let sd = (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64).sqrt();
    assert!(sd <= 0.5, "std {sd}");
    assert!(mean < -1.0);
}

#[test]
fn conjugate_convention_leaves_reduction_unchanged() {
    let c = config(200);
    let mut neg = c.clone();
    neg.scene.convention = TimeConvention::Negative;
    let a = run(&c).unwrap();
    let b = run(&neg).unwrap();
    let (ra, rb) = (a.succeeded().next().unwrap(), b.succeeded().next().unwrap());
    for (x, y) in ra.runs.iter().zip(&rb.runs) {
        for (p, q) in x.trajectory.iter().zip(&y.trajectory) {
            assert!((p - q).abs() <= 1e-8, "{}: {p} vs {q}", x.algorithm);
        }
        assert!((x.final_w.map(|v| v.conj()) - &y.final_w).norm() <= 1e-10 * x.final_w.norm().max(1.0));
    }
}

#[test]
fn runs_are_bit_identical_and_thread_independent() {
    let mut c = config(100);
    c.frequencies = vec![200.0, 300.0, 400.0];
    let a = run(&c).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run(&c).unwrap());
    assert_eq!(a, b);
    // The same frequency alone sees the same noise as inside the sweep.
    let mut single = c.clone();
    single.frequencies = vec![300.0];
    let s = run(&single).unwrap();
    assert_eq!(s.outcomes[0], a.outcomes[1]);
}

#[test]
fn transition_ends_below_fixed_and_nlms() {
    let r = run(&config(3000)).unwrap();
    let f = r.succeeded().next().unwrap();
    let last = |a| f.run_for(a).unwrap().final_reduction_db();
    assert!(last(Algorithm::NlmsTransition) < last(Algorithm::FixedKir));
    assert!(last(Algorithm::NlmsTransition) < last(Algorithm::Nlms));
}
