//! Kernel ridge regression of the primary field from reference microphones,
//! and the free-field model of the loudspeaker field.
//!
//! The kernel weights plane-wave components toward an assumed arrival
//! direction `eta` with sharpness `beta`:
//!
//! ```text
//! kappa(r1, r2) = J0( sqrt( (j beta eta - k r12)^T (j beta eta - k r12) ) ),  r12 = r1 - r2
//! ```
//!
//! (spherical `j0` in 3D). `beta = 0` recovers the isotropic `J0(k |r12|)`.

use nalgebra::{Cholesky, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{hermitian_condition, CMatrix, CVector};
use crate::scene::{greens_free_2d, SceneConfig, TimeConvention, Wavenumber};
use crate::specfun;

/// Default regularization: `1e-3 * trace(K) / R`.
pub const DEFAULT_TRACE_RELATIVE_LAMBDA: f64 = 1e-3;

/// Condition number of `K + λI` above which the system counts as singular.
pub const MAX_GRAM_CONDITION: f64 = 1e14;

/// Anything the kernel can be evaluated on (2D or 3D coordinates).
pub trait Position {
    fn dim(&self) -> usize;
    fn coord(&self, i: usize) -> f64;
}

impl Position for Point {
    fn dim(&self) -> usize {
        2
    }
    fn coord(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => panic!("coordinate index {i} out of range for a 2D point"),
        }
    }
}

impl Position for [f64; 3] {
    fn dim(&self) -> usize {
        3
    }
    fn coord(&self, i: usize) -> f64 {
        self[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// Absolute λ.
    Fixed(f64),
    /// λ = factor · trace(K) / R.
    TraceRelative(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::TraceRelative(DEFAULT_TRACE_RELATIVE_LAMBDA)
    }
}

impl Regularization {
    pub fn lambda_for(&self, gram: &CMatrix) -> f64 {
        match *self {
            Regularization::Fixed(v) => v,
            Regularization::TraceRelative(c) => c * gram.trace().re / gram.nrows() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub beta: f64,
    pub eta: Vec<f64>,
    pub regularization: Regularization,
    pub dim: usize,
    pub convention: TimeConvention,
}

impl KernelParams {
    pub fn new(beta: f64, eta: Vec<f64>, regularization: Regularization) -> Result<Self> {
        let p = Self {
            dim: eta.len(),
            beta,
            eta,
            regularization,
            convention: TimeConvention::Positive,
        };
        p.validate()?;
        Ok(p)
    }

    /// Isotropic kernel (`beta = 0`) in 2D.
    pub fn isotropic_2d(regularization: Regularization) -> Self {
        Self {
            beta: 0.0,
            eta: vec![1.0, 0.0],
            regularization,
            dim: 2,
            convention: TimeConvention::Positive,
        }
    }

    pub fn with_convention(mut self, convention: TimeConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dim != 2 && self.dim != 3 {
            return bad(format!("kernel dimension must be 2 or 3, got {}", self.dim));
        }
        if self.eta.len() != self.dim {
            return bad(format!("eta has {} components for dim {}", self.eta.len(), self.dim));
        }
        let norm = self.eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return bad(format!("eta must be a unit vector, |eta| = {norm}"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        let lam = match self.regularization {
            Regularization::Fixed(v) | Regularization::TraceRelative(v) => v,
        };
        if !(lam.is_finite() && lam >= 0.0) {
            return bad(format!("regularization must be >= 0, got {lam}"));
        }
        Ok(())
    }
}

/// Unit vector pointing from `from` toward `to`.
pub fn direction(from: &Point, to: &Point) -> Vec<f64> {
    let d = to.sub(from);
    let n = d.norm();
    vec![d.x / n, d.y / n]
}

/// Directionally weighted kernel between two positions.
pub fn kappa<P: Position>(params: &KernelParams, k: &Wavenumber, r1: &P, r2: &P) -> Result<Complex64> {
    if r1.dim() != params.dim || r2.dim() != params.dim {
        return Err(Error::DimensionMismatch(format!(
            "kernel of dimension {} evaluated on points of dimension {} and {}",
            params.dim,
            r1.dim(),
            r2.dim()
        )));
    }
    let mut dist2 = 0.0;
    let mut eta_dot = 0.0;
    let mut eta2 = 0.0;
    for i in 0..params.dim {
        let d = r1.coord(i) - r2.coord(i);
        dist2 += d * d;
        eta_dot += params.eta[i] * d;
        eta2 += params.eta[i] * params.eta[i];
    }
    let b = params.beta;
    let arg2 = Complex64::new(k.k * k.k * dist2 - b * b * eta2, -2.0 * b * k.k * eta_dot);
    let z = arg2.sqrt();
    let value = match params.dim {
        2 => specfun::bessel_j0_complex(z)?,
        _ => specfun::spherical_j0_complex(z),
    };
    Ok(params.convention.apply(value))
}

/// `K[i, j] = kappa(points[i], points[j])`.
pub fn gram_matrix<P: Position>(params: &KernelParams, k: &Wavenumber, points: &[P]) -> Result<CMatrix> {
    let n = points.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = kappa(params, k, &points[i], &points[j])?;
        }
    }
    Ok(g)
}

/// Kernel ridge regressor over a fixed set of reference positions.
///
/// Holds a Cholesky factor of `K + λI`; no inverse is formed.
#[derive(Debug, Clone)]
pub struct KernelInterpolator<P: Position + Clone> {
    params: KernelParams,
    k: Wavenumber,
    points: Vec<P>,
    lambda: f64,
    condition: f64,
    factor: Cholesky<Complex64, Dyn>,
}

impl<P: Position + Clone> KernelInterpolator<P> {
    pub fn new(params: &KernelParams, k: &Wavenumber, points: &[P]) -> Result<Self> {
        params.validate()?;
        if points.is_empty() {
            return Err(Error::InvalidParameter("no reference positions".into()));
        }
        let gram = gram_matrix(params, k, points)?;
        let lambda = params.regularization.lambda_for(&gram);
        let mut system = gram;
        for i in 0..points.len() {
            system[(i, i)] += Complex64::new(lambda, 0.0);
        }
        let condition = hermitian_condition(&system);
        let singular = || {
            Error::SingularMatrix(format!(
                "reference Gram matrix K + λI is singular (cond = {condition:e}, λ = {lambda:e})"
            ))
        };
        // NaN must count as singular.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(condition < MAX_GRAM_CONDITION) {
            return Err(singular());
        }
        let factor = Cholesky::new(system).ok_or_else(singular)?;
        Ok(Self {
            params: params.clone(),
            k: *k,
            points: points.to_vec(),
            lambda,
            condition,
            factor,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Condition number of `K + λI`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `κ(r)_i = kappa(r, point_i)`.
    pub fn kernel_vector(&self, r: &P) -> Result<CVector> {
        let v: Result<Vec<Complex64>> = self
            .points
            .iter()
            .map(|p| kappa(&self.params, &self.k, r, p))
            .collect();
        Ok(CVector::from_vec(v?))
    }

    /// Interpolation filter `z_x(r) = [(K + λI)^{-1}]^T κ(r)`.
    pub fn filter(&self, r: &P) -> Result<CVector> {
        // (K + λI)^T = conj(K + λI), so z = conj((K + λI)^{-1} conj(κ)).
        let kv = self.kernel_vector(r)?.map(|c| c.conj());
        Ok(self.factor.solve(&kv).map(|c| c.conj()))
    }

    /// Field estimate `z_x(r)^T x` from reference observations `x`.
    pub fn estimate(&self, r: &P, x: &CVector) -> Result<Complex64> {
        if x.len() != self.points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} reference positions",
                x.len(),
                self.points.len()
            )));
        }
        Ok(self.filter(r)?.iter().zip(x.iter()).map(|(z, v)| z * v).sum())
    }
}

/// `z_x(r)` for the scene's reference microphones (builds a fresh regressor).
pub fn interp_filter_zx(params: &KernelParams, k: &Wavenumber, ref_points: &[Point], r: &Point) -> Result<CVector> {
    KernelInterpolator::new(params, k, ref_points)?.filter(r)
}

/// Free-field model of the loudspeaker field at `r`:
/// `ζ_y(r)_l = G(r, r_l)`, deliberately ignoring any scatterer.
pub fn secondary_model_zeta(scene: &SceneConfig, k: &Wavenumber, r: &Point) -> Result<CVector> {
    let v: Result<Vec<Complex64>> = scene
        .secondary_sources
        .iter()
        .map(|src| greens_free_2d(k, r, src).map(|g| scene.convention.apply(g)))
        .collect();
    Ok(CVector::from_vec(v?))
}
