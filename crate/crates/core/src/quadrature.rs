//! Discretization of the target region and the offline interpolation
//! matrices
//!
//! ```text
//! A_yy = ∫ ζ(r)* ζ(r)^T dr,   A_yx = ∫ ζ(r)* z_x(r)^T dr,   A_xx = ∫ z_x(r)* z_x(r)^T dr
//! ```
//!
//! over the target disk minus the scatterer.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Disk, Point};
use crate::kernel::{secondary_model_zeta, KernelInterpolator, KernelParams};
use crate::linalg::{hermitian_condition, spectral_norm, CMatrix, CVector};
use crate::scene::{SceneConfig, Wavenumber};

/// Lattice spacing that yields 556 points on the benchmark region.
pub const DEFAULT_GRID_SPACING: f64 = 0.0357;

/// Grid points per work unit in parallel assembly. Fixed so that the
/// summation order, and hence the result, never depends on the thread count.
const ASSEMBLY_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridScheme {
    /// Uniform Cartesian lattice, midpoint weights.
    Lattice { spacing: f64 },
    /// Gauss-Legendre in radius, uniform in angle, about the region center.
    Polar { radial: usize, angular: usize },
}

impl Default for GridScheme {
    fn default() -> Self {
        GridScheme::Lattice {
            spacing: DEFAULT_GRID_SPACING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub scheme: GridScheme,
}

impl RegionGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn in_domain(p: &Point, region: &Disk, scatterer: Option<&Disk>) -> bool {
    region.contains(p) && scatterer.is_none_or(|s| !s.contains(p))
}

/// Uniform lattice `center + (i h, j h)` restricted to the region minus the
/// scatterer, each point weighted `h²`.
pub fn make_grid(region: &Disk, scatterer: Option<&Disk>, spacing: f64) -> Result<RegionGrid> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
    }
    let n = (region.radius / spacing).floor() as i64;
    let mut points = Vec::new();
    for j in -n..=n {
        for i in -n..=n {
            let p = Point::new(region.center.x + i as f64 * spacing, region.center.y + j as f64 * spacing);
            if in_domain(&p, region, scatterer) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid { spacing });
    }
    let weights = vec![spacing * spacing; points.len()];
    Ok(RegionGrid {
        points,
        weights,
        scheme: GridScheme::Lattice { spacing },
    })
}

/// Polar product rule. A scatterer concentric with the region is handled
/// exactly (the radial rule spans the annulus); an off-center one is
/// handled by dropping the nodes it covers.
pub fn make_polar_grid(region: &Disk, scatterer: Option<&Disk>, radial: usize, angular: usize) -> Result<RegionGrid> {
    let (Some(nr), true) = (NonZeroUsize::new(radial), angular > 0) else {
        return Err(Error::InvalidParameter(format!(
            "polar grid needs positive node counts, got {radial} x {angular}"
        )));
    };
    let concentric = scatterer.filter(|s| s.center.distance(&region.center) < 1e-12);
    let r0 = concentric.map_or(0.0, |s| s.radius);
    let r1 = region.radius;
    if r0 >= r1 {
        return Err(Error::InvalidScene("scatterer covers the target region".into()));
    }
    let rule = GaussLegendre::new(nr);
    let dtheta = 2.0 * PI / angular as f64;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(t, w) in rule.as_node_weight_pairs() {
        let r = 0.5 * (r1 - r0) * t + 0.5 * (r1 + r0);
        let wr = 0.5 * (r1 - r0) * w * r * dtheta;
        for a in 0..angular {
            let p = region.center.add(&Point::from_polar(r, (a as f64 + 0.5) * dtheta));
            if scatterer.is_none_or(|s| !s.contains(&p)) {
                points.push(p);
                weights.push(wr);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid { spacing: r1 / radial as f64 });
    }
    Ok(RegionGrid {
        points,
        weights,
        scheme: GridScheme::Polar { radial, angular },
    })
}

/// Build a grid for the scene's target region from a scheme description.
pub fn grid_for_scene(scene: &SceneConfig, scheme: &GridScheme) -> Result<RegionGrid> {
    match *scheme {
        GridScheme::Lattice { spacing } => make_grid(&scene.target_region, scene.scatterer.as_ref(), spacing),
        GridScheme::Polar { radial, angular } => {
            make_polar_grid(&scene.target_region, scene.scatterer.as_ref(), radial, angular)
        }
    }
}

/// Model vectors sampled on a grid: row `g` of `zeta` is `ζ(r_g)^T`, row `g`
/// of `zx` is `z_x(r_g)^T`.
#[derive(Debug, Clone)]
pub struct GridBasis {
    pub zeta: CMatrix,
    pub zx: CMatrix,
    pub lambda: f64,
    pub gram_condition: f64,
}

pub fn grid_basis(scene: &SceneConfig, k: &Wavenumber, params: &KernelParams, grid: &RegionGrid) -> Result<GridBasis> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid { spacing: 0.0 });
    }
    let params = params.clone().with_convention(scene.convention);
    let interp = KernelInterpolator::new(&params, k, &scene.reference_mics)?;
    let (l, r) = (scene.num_secondary(), scene.num_reference());
    let rows: Vec<Result<(CVector, CVector)>> = grid
        .points
        .par_iter()
        .map(|p| Ok((secondary_model_zeta(scene, k, p)?, interp.filter(p)?)))
        .collect();
    let mut zeta = CMatrix::zeros(grid.len(), l);
    let mut zx = CMatrix::zeros(grid.len(), r);
    for (g, row) in rows.into_iter().enumerate() {
        let (a, b) = row?;
        zeta.row_mut(g).copy_from(&a.transpose());
        zx.row_mut(g).copy_from(&b.transpose());
    }
    Ok(GridBasis {
        zeta,
        zx,
        lambda: interp.lambda(),
        gram_condition: interp.condition(),
    })
}

#[derive(Debug, Clone)]
pub struct InterpolationMatrices {
    pub a_yy: CMatrix,
    pub a_yx: CMatrix,
    pub a_xx: CMatrix,
    pub k: Wavenumber,
    pub grid_points: usize,
    pub grid_scheme: GridScheme,
    /// 2-norm condition number of `A_yy`.
    pub cond_a_yy: f64,
    /// `‖A_yy‖₂`, cached for the step-size rule.
    pub a_yy_norm: f64,
    /// Kernel regularization actually used.
    pub lambda: f64,
}

impl InterpolationMatrices {
    /// Assemble from explicit blocks (norms and conditioning are derived).
    pub fn from_blocks(a_yy: CMatrix, a_yx: CMatrix, a_xx: CMatrix, k: Wavenumber) -> Result<Self> {
        let (l, r) = (a_yy.nrows(), a_xx.nrows());
        if a_yy.ncols() != l || a_xx.ncols() != r || a_yx.shape() != (l, r) {
            return Err(Error::DimensionMismatch(format!(
                "A_yy {:?}, A_yx {:?}, A_xx {:?}",
                a_yy.shape(),
                a_yx.shape(),
                a_xx.shape()
            )));
        }
        Ok(Self {
            cond_a_yy: hermitian_condition(&a_yy),
            a_yy_norm: spectral_norm(&a_yy),
            a_yy,
            a_yx,
            a_xx,
            k,
            grid_points: 0,
            grid_scheme: GridScheme::default(),
            lambda: f64::NAN,
        })
    }

    pub fn num_secondary(&self) -> usize {
        self.a_yy.nrows()
    }

    pub fn num_reference(&self) -> usize {
        self.a_xx.nrows()
    }

    /// `yᴴA_yy y + yᴴA_yx x + xᴴA_yxᴴ y + xᴴA_xx x`.
    pub fn quadratic_form(&self, y: &CVector, x: &CVector) -> f64 {
        let t1 = y.dotc(&(&self.a_yy * y));
        let t2 = y.dotc(&(&self.a_yx * x));
        let t4 = x.dotc(&(&self.a_xx * x));
        (t1 + 2.0 * t2.re + t4).re
    }
}

fn weighted_outer(acc: &mut CMatrix, w: f64, left: &CVector, right: &CVector) {
    // acc += w * conj(left) right^T
    for j in 0..right.len() {
        let rj = right[j] * w;
        for i in 0..left.len() {
            acc[(i, j)] += left[i].conj() * rj;
        }
    }
}

/// Assemble the interpolation matrices from precomputed grid samples.
pub fn matrices_from_basis(basis: &GridBasis, grid: &RegionGrid, k: &Wavenumber) -> Result<InterpolationMatrices> {
    let (g, l, r) = (basis.zeta.nrows(), basis.zeta.ncols(), basis.zx.ncols());
    if g != grid.len() || basis.zx.nrows() != g {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} points but basis has {} rows",
            grid.len(),
            g
        )));
    }
    let partials: Vec<(CMatrix, CMatrix, CMatrix)> = (0..g)
        .step_by(ASSEMBLY_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut yy = CMatrix::zeros(l, l);
            let mut yx = CMatrix::zeros(l, r);
            let mut xx = CMatrix::zeros(r, r);
            for idx in start..(start + ASSEMBLY_CHUNK).min(g) {
                let w = grid.weights[idx];
                let zeta: CVector = basis.zeta.row(idx).transpose();
                let zx: CVector = basis.zx.row(idx).transpose();
                weighted_outer(&mut yy, w, &zeta, &zeta);
                weighted_outer(&mut yx, w, &zeta, &zx);
                weighted_outer(&mut xx, w, &zx, &zx);
            }
            (yy, yx, xx)
        })
        .collect();
    let mut a_yy = CMatrix::zeros(l, l);
    let mut a_yx = CMatrix::zeros(l, r);
    let mut a_xx = CMatrix::zeros(r, r);
    for (yy, yx, xx) in partials {
        a_yy += yy;
        a_yx += yx;
        a_xx += xx;
    }
    let mut mats = InterpolationMatrices::from_blocks(a_yy, a_yx, a_xx, *k)?;
    mats.grid_points = g;
    mats.grid_scheme = grid.scheme;
    mats.lambda = basis.lambda;
    Ok(mats)
}

/// `A_yy`, `A_yx`, `A_xx` by quadrature over `grid`.
pub fn interpolation_matrices(
    scene: &SceneConfig,
    k: &Wavenumber,
    params: &KernelParams,
    grid: &RegionGrid,
) -> Result<InterpolationMatrices> {
    let basis = grid_basis(scene, k, params, grid)?;
    matrices_from_basis(&basis, grid, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldLabel {
    Primary,
    Secondary,
    Total,
}

impl FieldLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldLabel::Primary => "primary",
            FieldLabel::Secondary => "secondary",
            FieldLabel::Total => "total",
        }
    }
}

/// Complex pressures sampled at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub points: Vec<Point>,
    pub values: Vec<Complex64>,
    pub label: FieldLabel,
}

impl FieldMap {
    pub fn new(points: Vec<Point>, values: Vec<Complex64>, label: FieldLabel) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(Self { points, values, label })
    }
}

/// `Σ_g w_g |u(r_g)|²`.
pub fn potential_energy(u: &FieldMap, grid: &RegionGrid) -> Result<f64> {
    if u.values.len() != grid.len() || u.points != grid.points {
        return Err(Error::DimensionMismatch(format!(
            "field map with {} values is not aligned to a grid of {} points",
            u.values.len(),
            grid.len()
        )));
    }
    Ok(u.values.iter().zip(&grid.weights).map(|(v, w)| w * v.norm_sqr()).sum())
}
