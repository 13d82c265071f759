//! Simulation loop: noisy microphone observations from the true field, a
//! controller driven for a number of iterations, and the regional noise
//! power reduction measured on the true field.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{
    fixed_filter, nlms_step, transition_step, Algorithm, ControlState, FixedFilter, SecondaryPath, SolvePath,
    StepParams,
};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernel::KernelParams;
use crate::linalg::{CMatrix, CVector};
use crate::quadrature::{grid_for_scene, interpolation_matrices, FieldLabel, FieldMap, GridScheme, InterpolationMatrices, RegionGrid};
use crate::scene::{FieldSolver, SceneConfig, TimeConvention, Wavenumber};

/// Reductions below this are reported as this value.
pub const PRED_FLOOR_DB: f64 = -200.0;

/// Lattice spacing for stored field maps unless configured otherwise.
pub const DEFAULT_MAP_SPACING: f64 = 0.01;

/// Initial filter for plain NLMS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlmsInit {
    #[default]
    Zero,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub frequencies: Vec<f64>,
    pub iterations: usize,
    /// Observation SNR in dB; `+inf` disables measurement noise.
    pub snr_db: f64,
    pub algorithms: Vec<Algorithm>,
    pub step: StepParams,
    pub kernel: KernelParams,
    /// Quadrature for the interpolation matrices.
    pub grid: GridScheme,
    /// Points where P_red is evaluated; defaults to `grid`.
    pub eval_grid: Option<GridScheme>,
    /// Points where checkpoint field maps are sampled.
    pub map_grid: GridScheme,
    pub seed: u64,
    pub nlms_init: NlmsInit,
    /// Iterations at which field maps are stored; empty means first and last.
    pub checkpoints: Vec<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.kernel.validate()?;
        self.step.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if self.frequencies.is_empty() {
            return bad("no frequencies requested".into());
        }
        if let Some(f) = self.frequencies.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return bad(format!("frequencies must be positive, got {f}"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad(format!("snr_db must be finite or +inf, got {}", self.snr_db));
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms requested".into());
        }
        if let Some(c) = self.checkpoints.iter().find(|&&c| c >= self.iterations) {
            return bad(format!("checkpoint {c} is beyond the last iteration {}", self.iterations - 1));
        }
        Ok(())
    }

    pub fn checkpoint_iterations(&self) -> Vec<usize> {
        let mut c = if self.checkpoints.is_empty() {
            vec![0, self.iterations - 1]
        } else {
            self.checkpoints.clone()
        };
        c.sort_unstable();
        c.dedup();
        c
    }

    fn needs_interpolation(&self) -> bool {
        self.nlms_init == NlmsInit::Fixed || self.algorithms.iter().any(|a| a.uses_interpolation())
    }
}

/// RNG for one frequency. Keyed by the frequency value so a frequency gets
/// the same noise whether it runs alone or inside a sweep.
pub fn frequency_rng(seed: u64, frequency: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frequency.to_bits());
    rng
}

/// Noise-free microphone signals plus per-array noise levels.
#[derive(Debug, Clone)]
pub struct Observer {
    pub x_clean: CVector,
    pub d_clean: CVector,
    sigma_x: f64,
    sigma_d: f64,
    convention: TimeConvention,
}

fn noise_std(clean: &CVector, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY || clean.is_empty() {
        return 0.0;
    }
    let power = clean.norm_squared() / clean.len() as f64;
    (power * 10f64.powf(-snr_db / 10.0)).sqrt()
}

/// True field at `points` from every primary source (unit amplitude each).
fn primary_field(solver: &FieldSolver, points: &[Point]) -> Result<CVector> {
    let sources = &solver.scene().primary_sources;
    let v: Result<Vec<Complex64>> = points
        .iter()
        .map(|r| sources.iter().map(|s| solver.pressure(s, r)).sum())
        .collect();
    Ok(CVector::from_vec(v?))
}

impl Observer {
    pub fn new(solver: &FieldSolver, snr_db: f64) -> Result<Self> {
        let scene = solver.scene();
        let x_clean = primary_field(solver, &scene.reference_mics)?;
        let d_clean = primary_field(solver, &scene.error_mics)?;
        Ok(Self {
            sigma_x: noise_std(&x_clean, snr_db),
            sigma_d: noise_std(&d_clean, snr_db),
            x_clean,
            d_clean,
            convention: scene.convention,
        })
    }

    fn noisy(&self, clean: &CVector, sigma: f64, rng: &mut ChaCha8Rng) -> CVector {
        if sigma == 0.0 {
            return clean.clone();
        }
        let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
        clean.map(|c| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c + self.convention.apply(Complex64::new(s * re, s * im))
        })
    }

    /// One snapshot `(x, d)` with fresh noise.
    pub fn observe(&self, rng: &mut ChaCha8Rng) -> (CVector, CVector) {
        let x = self.noisy(&self.x_clean, self.sigma_x, rng);
        let d = self.noisy(&self.d_clean, self.sigma_d, rng);
        (x, d)
    }
}

/// Reference and error microphone snapshot for the scene at `k`.
pub fn observe(scene: &SceneConfig, k: &Wavenumber, rng: &mut ChaCha8Rng, snr_db: f64) -> Result<(CVector, CVector)> {
    let solver = FieldSolver::new(scene, *k)?;
    Ok(Observer::new(&solver, snr_db)?.observe(rng))
}

/// `e = d + G y`.
pub fn error_signal(g_true: &CMatrix, d: &CVector, y: &CVector) -> Result<CVector> {
    if g_true.nrows() != d.len() || g_true.ncols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "G is {}x{}, d has {} entries, y has {}",
            g_true.nrows(),
            g_true.ncols(),
            d.len(),
            y.len()
        )));
    }
    Ok(d + g_true * y)
}

/// `10 log10(num / den)`, floored.
pub fn reduction_db(num: f64, den: f64) -> f64 {
    (10.0 * (num / den).log10()).max(PRED_FLOOR_DB)
}

/// True primary and loudspeaker fields on a fixed point set.
#[derive(Debug, Clone)]
pub struct FieldEvaluator {
    pub points: Vec<Point>,
    /// `u_p(r_j)`.
    pub primary: CVector,
    /// Row j holds the true transfer from each loudspeaker to `r_j`.
    pub transfer: CMatrix,
    primary_power: f64,
}

impl FieldEvaluator {
    pub fn new(solver: &FieldSolver, points: &[Point]) -> Result<Self> {
        let scene = solver.scene();
        let primary = primary_field(solver, points)?;
        let rows: Vec<Result<Vec<Complex64>>> = points
            .par_iter()
            .map(|r| scene.secondary_sources.iter().map(|s| solver.pressure(s, r)).collect())
            .collect();
        let mut transfer = CMatrix::zeros(points.len(), scene.num_secondary());
        for (j, row) in rows.into_iter().enumerate() {
            for (l, v) in row?.into_iter().enumerate() {
                transfer[(j, l)] = v;
            }
        }
        // Summed in the same order as `reduction_db` so that y = 0 gives exactly 0 dB.
        let primary_power = primary.iter().map(|v| v.norm_sqr()).fold(0.0, |a, b| a + b);
        if primary_power == 0.0 {
            return Err(Error::InvalidParameter("primary field vanishes on the evaluation points".into()));
        }
        Ok(Self {
            points: points.to_vec(),
            primary,
            transfer,
            primary_power,
        })
    }

    /// `u_s = T y`.
    pub fn secondary(&self, y: &CVector) -> CVector {
        &self.transfer * y
    }

    /// P_red in dB for drive signals `y`.
    pub fn reduction_db(&self, y: &CVector) -> f64 {
        let mut num = 0.0f64;
        for j in 0..self.points.len() {
            let mut ue = self.primary[j];
            for l in 0..y.len() {
                ue += self.transfer[(j, l)] * y[l];
            }
            num += ue.norm_sqr();
        }
        reduction_db(num, self.primary_power)
    }

    pub fn snapshot(&self, iteration: usize, y: &CVector) -> FieldSnapshot {
        let us = self.secondary(y);
        let ue = &self.primary + &us;
        let map = |v: &CVector, label| FieldMap {
            points: self.points.clone(),
            values: v.iter().copied().collect(),
            label,
        };
        FieldSnapshot {
            iteration,
            primary: map(&self.primary, FieldLabel::Primary),
            secondary: map(&us, FieldLabel::Secondary),
            total: map(&ue, FieldLabel::Total),
        }
    }
}

/// P_red and total field for drive signals `y` on `grid`.
pub fn evaluate_field(scene: &SceneConfig, k: &Wavenumber, y: &CVector, grid: &RegionGrid) -> Result<(f64, FieldMap)> {
    let solver = FieldSolver::new(scene, *k)?;
    let eval = FieldEvaluator::new(&solver, &grid.points)?;
    if y.len() != scene.num_secondary() {
        return Err(Error::DimensionMismatch(format!("{} drive signals for {} loudspeakers", y.len(), scene.num_secondary())));
    }
    let snap = eval.snapshot(0, y);
    Ok((eval.reduction_db(y), snap.total))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub iteration: usize,
    pub primary: FieldMap,
    pub secondary: FieldMap,
    pub total: FieldMap,
}

impl FieldSnapshot {
    /// `10 log10(|u_e|² / mean |u_p|²)` per point.
    pub fn normalized_power_db(&self) -> Vec<f64> {
        let n = self.primary.values.len() as f64;
        let mean = self.primary.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        self.total.values.iter().map(|v| reduction_db(v.norm_sqr(), mean)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    /// P_red in dB, one entry per iteration.
    pub trajectory: Vec<f64>,
    pub final_w: CMatrix,
    pub snapshots: Vec<FieldSnapshot>,
}

impl AlgorithmRun {
    pub fn final_reduction_db(&self) -> f64 {
        *self.trajectory.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDiagnostics {
    pub wavenumber: f64,
    pub grid_points: usize,
    pub eval_points: usize,
    pub secondary_path_norm: f64,
    pub cond_a_yy: Option<f64>,
    pub solve_path: Option<SolvePath>,
    pub stationarity_residual: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRun {
    pub frequency: f64,
    pub diagnostics: FrequencyDiagnostics,
    pub runs: Vec<AlgorithmRun>,
}

impl FrequencyRun {
    pub fn run_for(&self, algorithm: Algorithm) -> Option<&AlgorithmRun> {
        self.runs.iter().find(|r| r.algorithm == algorithm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyOutcome {
    pub frequency: f64,
    /// The failure message when this frequency could not be simulated.
    pub result: std::result::Result<FrequencyRun, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub outcomes: Vec<FrequencyOutcome>,
}

impl RunResult {
    pub fn failures(&self) -> Vec<(f64, &str)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (o.frequency, e.as_str())))
            .collect()
    }

    pub fn succeeded(&self) -> impl Iterator<Item = &FrequencyRun> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok())
    }
}

/// Everything time-invariant at one frequency.
pub struct FrequencySetup {
    pub k: Wavenumber,
    pub path: SecondaryPath,
    pub observer: Observer,
    pub evaluator: FieldEvaluator,
    pub map_evaluator: Option<FieldEvaluator>,
    pub mats: Option<InterpolationMatrices>,
    pub fixed: Option<FixedFilter>,
    pub grid_points: usize,
}

impl FrequencySetup {
    pub fn new(config: &ExperimentConfig, frequency: f64) -> Result<Self> {
        let scene = &config.scene;
        let k = scene.wavenumber(frequency)?;
        let solver = FieldSolver::new(scene, k)?;
        let path = SecondaryPath::new(solver.transfer_matrix()?);
        let observer = Observer::new(&solver, config.snr_db)?;
        let grid = grid_for_scene(scene, &config.grid)?;
        let eval_grid = match &config.eval_grid {
            Some(s) if *s != config.grid => grid_for_scene(scene, s)?,
            _ => grid.clone(),
        };
        let evaluator = FieldEvaluator::new(&solver, &eval_grid.points)?;
        let map_evaluator = if config.map_grid == eval_grid.scheme {
            None
        } else {
            let map_grid = grid_for_scene(scene, &config.map_grid)?;
            Some(FieldEvaluator::new(&solver, &map_grid.points)?)
        };
        let (mats, fixed) = if config.needs_interpolation() {
            let mats = interpolation_matrices(scene, &k, &config.kernel, &grid)?;
            let fixed = fixed_filter(&mats)?;
            (Some(mats), Some(fixed))
        } else {
            (None, None)
        };
        Ok(Self {
            k,
            path,
            observer,
            evaluator,
            map_evaluator,
            mats,
            fixed,
            grid_points: grid.len(),
        })
    }

    pub fn diagnostics(&self) -> FrequencyDiagnostics {
        FrequencyDiagnostics {
            wavenumber: self.k.k,
            grid_points: self.grid_points,
            eval_points: self.evaluator.points.len(),
            secondary_path_norm: self.path.gram_norm().sqrt(),
            cond_a_yy: self.mats.as_ref().map(|m| m.cond_a_yy),
            solve_path: self.fixed.as_ref().map(|f| f.solve_path),
            stationarity_residual: match (&self.fixed, &self.mats) {
                (Some(f), Some(m)) => Some(f.stationarity_residual(m)),
                _ => None,
            },
            lambda: self.mats.as_ref().map(|m| m.lambda),
        }
    }

    fn fixed_w(&self) -> Result<CMatrix> {
        self.fixed
            .as_ref()
            .map(|f| f.w.clone())
            .ok_or_else(|| Error::InvalidParameter("fixed filter was not prepared".into()))
    }

    /// Drive one algorithm for `config.iterations` snapshots.
    pub fn run_algorithm(&self, config: &ExperimentConfig, algorithm: Algorithm) -> Result<AlgorithmRun> {
        let (l, r) = (config.scene.num_secondary(), config.scene.num_reference());
        let w0 = match (algorithm, config.nlms_init) {
            (Algorithm::Nlms, NlmsInit::Zero) => CMatrix::zeros(l, r),
            _ => self.fixed_w()?,
        };
        let mut state = ControlState::new(algorithm, w0, config.step.gamma);
        let mut rng = frequency_rng(config.seed, self.k.frequency);
        let checkpoints = config.checkpoint_iterations();
        let mut trajectory = Vec::with_capacity(config.iterations);
        let mut snapshots = Vec::with_capacity(checkpoints.len());
        for it in 0..config.iterations {
            let (x, d) = self.observer.observe(&mut rng);
            let y = &state.w * &x;
            let e = error_signal(self.path.matrix(), &d, &y)?;
            trajectory.push(self.evaluator.reduction_db(&y));
            if checkpoints.binary_search(&it).is_ok() {
                snapshots.push(self.map_evaluator.as_ref().unwrap_or(&self.evaluator).snapshot(it, &y));
            }
            if it + 1 == config.iterations {
                break;
            }
            state = match algorithm {
                Algorithm::Nlms => nlms_step(&state, &x, &e, &self.path, &config.step)?,
                Algorithm::FixedKir => state,
                Algorithm::NlmsTransition => {
                    let mats = self.mats.as_ref().expect("prepared with the fixed filter");
                    transition_step(&state, &x, &e, &self.path, mats, &config.step)?
                }
            };
        }
        Ok(AlgorithmRun {
            algorithm,
            trajectory,
            final_w: state.w,
            snapshots,
        })
    }
}

pub fn run_frequency(config: &ExperimentConfig, frequency: f64) -> Result<FrequencyRun> {
    let setup = FrequencySetup::new(config, frequency)?;
    let runs = config
        .algorithms
        .iter()
        .map(|&a| setup.run_algorithm(config, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyRun {
        frequency,
        diagnostics: setup.diagnostics(),
        runs,
    })
}

/// Run every frequency in parallel. A failing frequency is recorded in its
/// outcome; only an invalid config fails the whole run.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let outcomes = config
        .frequencies
        .par_iter()
        .map(|&f| FrequencyOutcome {
            frequency: f,
            result: run_frequency(config, f).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(RunResult {
        config: config.clone(),
        outcomes,
    })
}
