//! Controllers acting on frequency-domain snapshots: multichannel NLMS, the
//! kernel-interpolation fixed filter, and NLMS that transitions away from the
//! fixed filter with a decaying regional-energy term.

use std::fmt;
use std::str::FromStr;

use nalgebra::Cholesky;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, spectral_norm, CMatrix, CVector};
use crate::quadrature::InterpolationMatrices;

/// `A_yy` is solved by Cholesky below this condition number, by pseudo-inverse above.
pub const FIXED_FILTER_MAX_CONDITION: f64 = 1e12;
/// Relative singular-value cutoff for the pseudo-inverse fallback.
pub const PINV_CUTOFF: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nlms,
    FixedKir,
    NlmsTransition,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Nlms, Algorithm::FixedKir, Algorithm::NlmsTransition];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Nlms => "nlms",
            Algorithm::FixedKir => "fixed_kir",
            Algorithm::NlmsTransition => "nlms_transition",
        }
    }

    /// Whether the algorithm needs the interpolation matrices.
    pub fn uses_interpolation(&self) -> bool {
        !matches!(self, Algorithm::Nlms)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm '{s}' (expected nlms, fixed_kir or nlms_transition)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    pub mu0: f64,
    pub epsilon: f64,
    /// Forgetting factor. Zero is accepted and disables the energy term.
    pub gamma: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            mu0: 0.1,
            epsilon: 1e-8,
            gamma: 0.9,
        }
    }
}

impl StepParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0 < 2.0) {
            return Err(Error::InvalidParameter(format!("mu0 must lie in (0, 2), got {}", self.mu0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Secondary-path matrix `G` (M×L) with its cached `‖GᴴG‖₂ = σ_max(G)²`.
#[derive(Debug, Clone)]
pub struct SecondaryPath {
    g: CMatrix,
    gram_norm: f64,
}

impl SecondaryPath {
    pub fn new(g: CMatrix) -> Self {
        let s = spectral_norm(&g);
        Self { g, gram_norm: s * s }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.g
    }

    /// `‖GᴴG‖₂`.
    pub fn gram_norm(&self) -> f64 {
        self.gram_norm
    }

    pub fn num_error(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_secondary(&self) -> usize {
        self.g.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    /// Control filter, L×R.
    pub w: CMatrix,
    pub n: u64,
    pub algorithm: Algorithm,
    /// Current weight `γⁿ` of the energy term (transition only).
    pub gamma_pow: f64,
}

impl ControlState {
    /// State at `n = 0` with filter `w`. For the transition algorithm the
    /// energy weight starts at 1, or at 0 when `gamma == 0` so the term is
    /// disabled from the first step.
    pub fn new(algorithm: Algorithm, w: CMatrix, gamma: f64) -> Self {
        let gamma_pow = if algorithm == Algorithm::NlmsTransition && gamma == 0.0 { 0.0 } else { 1.0 };
        Self {
            w,
            n: 0,
            algorithm,
            gamma_pow,
        }
    }

    pub fn zeros(algorithm: Algorithm, l: usize, r: usize) -> Self {
        Self::new(algorithm, CMatrix::zeros(l, r), 0.0)
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// `y = W x`.
pub fn drive_signals(state: &ControlState, x: &CVector) -> Result<CVector> {
    check_len("reference vector", x.len(), state.w.ncols())?;
    Ok(&state.w * x)
}

/// `μ = μ₀ / (‖GᴴG‖₂ ‖x‖² + ε)`.
pub fn nlms_step_size(path: &SecondaryPath, x: &CVector, p: &StepParams) -> f64 {
    p.mu0 / (path.gram_norm * x.norm_squared() + p.epsilon)
}

/// `μ = μ₀ / (γⁿ ‖A_yy‖₂ + ‖GᴴG‖₂ ‖x‖² + ε)`.
pub fn transition_step_size(gamma_pow: f64, a_yy_norm: f64, path: &SecondaryPath, x: &CVector, p: &StepParams) -> f64 {
    if gamma_pow == 0.0 {
        return nlms_step_size(path, x, p);
    }
    p.mu0 / (gamma_pow * a_yy_norm + path.gram_norm * x.norm_squared() + p.epsilon)
}

// W <- W - mu v x^H
fn rank_one_update(w: &mut CMatrix, mu: f64, v: &CVector, x: &CVector) {
    for j in 0..x.len() {
        let xc = x[j].conj();
        for i in 0..v.len() {
            w[(i, j)] -= (v[i] * xc) * mu;
        }
    }
}

fn check_step_dims(state: &ControlState, x: &CVector, e: &CVector, path: &SecondaryPath) -> Result<()> {
    check_len("reference vector", x.len(), state.w.ncols())?;
    check_len("error vector", e.len(), path.num_error())?;
    if path.num_secondary() != state.w.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "secondary path has {} loudspeakers, filter has {}",
            path.num_secondary(),
            state.w.nrows()
        )));
    }
    Ok(())
}

/// One multichannel NLMS update `W ← W − μ Gᴴ e xᴴ`.
pub fn nlms_step(state: &ControlState, x: &CVector, e: &CVector, path: &SecondaryPath, p: &StepParams) -> Result<ControlState> {
    if state.algorithm != Algorithm::Nlms {
        return Err(Error::InvalidParameter(format!("nlms_step called on a {} state", state.algorithm)));
    }
    check_step_dims(state, x, e, path)?;
    let mu = nlms_step_size(path, x, p);
    let grad = path.g.adjoint() * e;
    let mut next = state.clone();
    rank_one_update(&mut next.w, mu, &grad, x);
    next.n += 1;
    Ok(next)
}

/// Bracketed direction `γⁿ(A_yy y + A_yx x) + Gᴴ e` of the transition update.
fn transition_direction(
    gamma_pow: f64,
    y: &CVector,
    x: &CVector,
    e: &CVector,
    path: &SecondaryPath,
    mats: &InterpolationMatrices,
) -> CVector {
    let ge = path.g.adjoint() * e;
    if gamma_pow == 0.0 {
        return ge;
    }
    (&mats.a_yy * y + &mats.a_yx * x) * Complex64::new(gamma_pow, 0.0) + ge
}

/// One update of NLMS with the decaying regional-energy term.
pub fn transition_step(
    state: &ControlState,
    x: &CVector,
    e: &CVector,
    path: &SecondaryPath,
    mats: &InterpolationMatrices,
    p: &StepParams,
) -> Result<ControlState> {
    if state.algorithm != Algorithm::NlmsTransition {
        return Err(Error::InvalidParameter(format!("transition_step called on a {} state", state.algorithm)));
    }
    check_step_dims(state, x, e, path)?;
    if mats.num_secondary() != state.w.nrows() || mats.num_reference() != state.w.ncols() {
        return Err(Error::DimensionMismatch("interpolation matrices do not match the filter".into()));
    }
    let y = &state.w * x;
    let dir = transition_direction(state.gamma_pow, &y, x, e, path, mats);
    let mu = transition_step_size(state.gamma_pow, mats.a_yy_norm, path, x, p);
    let mut next = state.clone();
    rank_one_update(&mut next.w, mu, &dir, x);
    next.n += 1;
    next.gamma_pow *= p.gamma;
    Ok(next)
}

/// Instantaneous transition cost `γⁿ J_PE(W) + ‖d + G W x‖²`, with the
/// regional energy taken from the interpolation matrices.
pub fn transition_objective(
    w: &CMatrix,
    x: &CVector,
    d: &CVector,
    path: &SecondaryPath,
    mats: &InterpolationMatrices,
    gamma_pow: f64,
) -> f64 {
    let y = w * x;
    let e = d + &path.g * &y;
    gamma_pow * mats.quadratic_form(&y, x) + e.norm_squared()
}

/// Wirtinger gradient `∂J/∂W*` of [`transition_objective`].
pub fn transition_gradient(
    w: &CMatrix,
    x: &CVector,
    d: &CVector,
    path: &SecondaryPath,
    mats: &InterpolationMatrices,
    gamma_pow: f64,
) -> CMatrix {
    let y = w * x;
    let e = d + &path.g * &y;
    transition_direction(gamma_pow, &y, x, &e, path, mats) * x.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvePath {
    Cholesky,
    PseudoInverse,
}

#[derive(Debug, Clone)]
pub struct FixedFilter {
    pub w: CMatrix,
    pub solve_path: SolvePath,
    /// Condition number of `A_yy`.
    pub condition: f64,
}

impl FixedFilter {
    /// `‖A_yy W + A_yx‖_F / ‖A_yx‖_F`.
    pub fn stationarity_residual(&self, mats: &InterpolationMatrices) -> f64 {
        let r = &mats.a_yy * &self.w + &mats.a_yx;
        let scale = mats.a_yx.norm();
        if scale == 0.0 {
            r.norm()
        } else {
            r.norm() / scale
        }
    }
}

/// `W_fixed = −A_yy⁻¹ A_yx`, with a pseudo-inverse when `A_yy` is ill-conditioned.
pub fn fixed_filter(mats: &InterpolationMatrices) -> Result<FixedFilter> {
    let condition = mats.cond_a_yy;
    if condition < FIXED_FILTER_MAX_CONDITION {
        if let Some(chol) = Cholesky::new(mats.a_yy.clone()) {
            let mut w = -chol.solve(&mats.a_yx);
            for _ in 0..REFINEMENT_STEPS {
                let residual = &mats.a_yy * &w + &mats.a_yx;
                w -= chol.solve(&residual);
            }
            return Ok(FixedFilter {
                w,
                solve_path: SolvePath::Cholesky,
                condition,
            });
        }
    }
    let pinv = pseudo_inverse(&mats.a_yy, PINV_CUTOFF)?;
    Ok(FixedFilter {
        w: -(pinv * &mats.a_yx),
        solve_path: SolvePath::PseudoInverse,
        condition,
    })
}
