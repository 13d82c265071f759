//! Experiment geometry and the ground-truth sound field.
//!
//! Point sources radiate the 2D free-field Green's function. When a rigid
//! circular scatterer is present, its field is added through the cylindrical
//! harmonic series whose coefficients enforce a vanishing normal derivative
//! on the scatterer surface.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Disk, Point};
use crate::specfun;

pub const DEFAULT_SOUND_SPEED: f64 = 343.0;

/// Distance below which a source and receiver are treated as coincident.
pub const SINGULAR_DISTANCE: f64 = 1e-9;

const SERIES_BUFFER: usize = 16;
const SERIES_MAX_ORDER: usize = 120;
const SERIES_TAIL_BLOCK: usize = 10;
const SERIES_TAIL_TOL: f64 = 1e-10;

/// Sign convention of the harmonic time dependence.
///
/// `Positive` is `e^{+jωt}` (outgoing waves behave as `H^(2)`); `Negative`
/// conjugates every field and kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeConvention {
    #[default]
    Positive,
    Negative,
}

impl TimeConvention {
    #[inline]
    pub fn apply(self, z: Complex64) -> Complex64 {
        match self {
            TimeConvention::Positive => z,
            TimeConvention::Negative => z.conj(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber {
    pub frequency: f64,
    pub k: f64,
}

impl Wavenumber {
    pub fn new(frequency: f64, sound_speed: f64) -> Result<Self> {
        let k = 2.0 * PI * frequency / sound_speed;
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wavenumber must be positive (f = {frequency} Hz, c = {sound_speed} m/s)"
            )));
        }
        Ok(Self { frequency, k })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub primary_sources: Vec<Point>,
    pub secondary_sources: Vec<Point>,
    pub reference_mics: Vec<Point>,
    pub error_mics: Vec<Point>,
    pub scatterer: Option<Disk>,
    pub target_region: Disk,
    pub sound_speed: f64,
    pub convention: TimeConvention,
}

impl SceneConfig {
    pub fn num_secondary(&self) -> usize {
        self.secondary_sources.len()
    }

    pub fn num_reference(&self) -> usize {
        self.reference_mics.len()
    }

    pub fn num_error(&self) -> usize {
        self.error_mics.len()
    }

    pub fn wavenumber(&self, frequency: f64) -> Result<Wavenumber> {
        Wavenumber::new(frequency, self.sound_speed)
    }

    /// Check the geometric invariants; the error message names the violated one.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return bad(format!("sound_speed must be positive, got {}", self.sound_speed));
        }
        if !(self.target_region.radius.is_finite() && self.target_region.radius > 0.0) {
            return bad("target_region radius must be positive".into());
        }
        for (name, set) in [
            ("primary_sources", &self.primary_sources),
            ("secondary_sources", &self.secondary_sources),
            ("reference_mics", &self.reference_mics),
            ("error_mics", &self.error_mics),
        ] {
            if set.is_empty() {
                return bad(format!("{name} must not be empty"));
            }
            if let Some(p) = set.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
                return bad(format!("{name} contains non-finite position {:?}", p.coords()));
            }
        }
        if let Some(s) = &self.scatterer {
            if !(s.radius.is_finite() && s.radius > 0.0) {
                return bad("scatterer radius must be positive".into());
            }
            for (name, set) in self.labelled_positions() {
                for (i, p) in set.iter().enumerate() {
                    if p.distance(&s.center) <= s.radius {
                        return bad(format!(
                            "{name}[{i}] at ({}, {}) lies inside the scatterer",
                            p.x, p.y
                        ));
                    }
                }
            }
        }
        let region = &self.target_region;
        for (i, p) in self.error_mics.iter().enumerate() {
            if !region.contains(p) {
                return bad(format!(
                    "error_mics[{i}] at ({}, {}) lies outside the target region",
                    p.x, p.y
                ));
            }
        }
        for (name, set) in [
            ("reference_mics", &self.reference_mics),
            ("secondary_sources", &self.secondary_sources),
        ] {
            for (i, p) in set.iter().enumerate() {
                if region.contains(p) {
                    return bad(format!(
                        "{name}[{i}] at ({}, {}) lies inside the target region",
                        p.x, p.y
                    ));
                }
            }
        }
        let all: Vec<(&str, usize, &Point)> = self
            .labelled_positions()
            .into_iter()
            .flat_map(|(name, set)| set.iter().enumerate().map(move |(i, p)| (name, i, p)))
            .collect();
        let is_mic = |name: &str| name.ends_with("_mics");
        for (a, pa) in all.iter().enumerate() {
            for pb in &all[a + 1..] {
                // Two microphones may share a position; the field there is finite.
                if is_mic(pa.0) && is_mic(pb.0) {
                    continue;
                }
                if pa.2.distance(pb.2) < SINGULAR_DISTANCE {
                    return bad(format!(
                        "positions {}[{}] and {}[{}] coincide",
                        pa.0, pa.1, pb.0, pb.1
                    ));
                }
            }
        }
        Ok(())
    }

    fn labelled_positions(&self) -> [(&'static str, &Vec<Point>); 4] {
        [
            ("primary_sources", &self.primary_sources),
            ("secondary_sources", &self.secondary_sources),
            ("reference_mics", &self.reference_mics),
            ("error_mics", &self.error_mics),
        ]
    }

    /// The same geometry with the scatterer removed.
    pub fn without_scatterer(&self) -> SceneConfig {
        SceneConfig {
            scatterer: None,
            ..self.clone()
        }
    }
}

/// Positions on a circle at angles `2π i / count`, radius `radius + offsets[i % len]`.
pub fn circular_array(center: Point, radius: f64, count: usize, start_angle: f64, radial_offsets: &[f64]) -> Vec<Point> {
    (0..count)
        .map(|i| {
            let shift = if radial_offsets.is_empty() {
                0.0
            } else {
                radial_offsets[i % radial_offsets.len()]
            };
            let angle = start_angle + 2.0 * PI * i as f64 / count as f64;
            center.add(&Point::from_polar(radius + shift, angle))
        })
        .collect()
}

/// The benchmark layout: 12 loudspeakers on a 1 m circle, 6 reference
/// microphones near a 2 m circle (even indices pushed out 3 cm, odd pulled in),
/// error microphones at (±0.3, 0), a noise source at (−3.5, 0.2) and a rigid
/// 0.15 m cylinder at the origin inside a 0.5 m target disk.
pub fn benchmark_scene() -> SceneConfig {
    SceneConfig {
        primary_sources: vec![Point::new(-3.5, 0.2)],
        secondary_sources: circular_array(Point::ORIGIN, 1.0, 12, 0.0, &[]),
        reference_mics: circular_array(Point::ORIGIN, 2.0, 6, 0.0, &[0.03, -0.03]),
        error_mics: vec![Point::new(0.3, 0.0), Point::new(-0.3, 0.0)],
        scatterer: Some(Disk::new(Point::ORIGIN, 0.15)),
        target_region: Disk::new(Point::ORIGIN, 0.5),
        sound_speed: DEFAULT_SOUND_SPEED,
        convention: TimeConvention::Positive,
    }
}

/// Free-field 2D Green's function `−(j/4) H0^(2)(k |r − r_src|)` (e^{+jωt}).
pub fn greens_free_2d(k: &Wavenumber, r: &Point, r_src: &Point) -> Result<Complex64> {
    let d = r.distance(r_src);
    if d < SINGULAR_DISTANCE {
        return Err(Error::Singularity { distance: d });
    }
    let h0 = specfun::hankel2(0, k.k * d)?;
    Ok(Complex64::new(0.0, -0.25) * h0)
}

/// Ground-truth field evaluator for one scene and frequency.
///
/// Holds the per-order Neumann ratios `J_n'(ka) / H_n^(2)'(ka)` so that many
/// source/receiver pairs can be evaluated cheaply.
#[derive(Debug, Clone)]
pub struct FieldSolver {
    scene: SceneConfig,
    k: Wavenumber,
    neumann_ratio: Vec<Complex64>,
}

impl FieldSolver {
    pub fn new(scene: &SceneConfig, k: Wavenumber) -> Result<Self> {
        let neumann_ratio = match &scene.scatterer {
            None => Vec::new(),
            Some(s) => neumann_ratios(k.k * s.radius)?,
        };
        Ok(Self {
            scene: scene.clone(),
            k,
            neumann_ratio,
        })
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    /// Pressure at `r` radiated by a unit point source at `src`.
    pub fn pressure(&self, src: &Point, r: &Point) -> Result<Complex64> {
        if let Some(s) = &self.scene.scatterer {
            for (what, p) in [("source", src), ("receiver", r)] {
                if p.distance(&s.center) <= s.radius {
                    return Err(Error::Domain {
                        function: "pressure_true",
                        detail: format!("{what} at ({}, {}) is inside the scatterer", p.x, p.y),
                    });
                }
            }
        }
        self.pressure_unchecked(src, r)
    }

    /// Incident plus scattered series without the scatterer-membership check.
    /// Inside the scatterer this is the analytic continuation of the exterior
    /// field, useful for differencing across the boundary.
    pub fn pressure_unchecked(&self, src: &Point, r: &Point) -> Result<Complex64> {
        let incident = greens_free_2d(&self.k, r, src)?;
        let total = match &self.scene.scatterer {
            None => incident,
            Some(s) => incident + self.scattered(s, src, r, incident.norm())?,
        };
        Ok(self.scene.convention.apply(total))
    }

    /// Truncation order the adaptive rule starts from at receiver `r`.
    pub fn initial_order(&self, r: &Point) -> usize {
        match &self.scene.scatterer {
            None => 0,
            Some(s) => {
                let rho = r.distance(&s.center);
                ((self.k.k * rho.max(s.radius)).ceil() as usize + SERIES_BUFFER).min(SERIES_MAX_ORDER)
            }
        }
    }

    /// Scattered field summed over orders `|n| <= order` exactly, without
    /// convergence control. Returns zero when there is no scatterer.
    pub fn scattered_fixed_order(&self, src: &Point, r: &Point, order: usize) -> Result<Complex64> {
        let Some(s) = &self.scene.scatterer else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        if order > SERIES_MAX_ORDER + SERIES_TAIL_BLOCK {
            return Err(Error::Convergence { max_order: order });
        }
        let terms = self.series_terms(s, src, r, order)?;
        let sum: Complex64 = terms.iter().sum();
        Ok(self.scene.convention.apply(Complex64::new(0.0, -0.25) * sum))
    }

    fn series_terms(&self, s: &Disk, src: &Point, r: &Point, top: usize) -> Result<Vec<Complex64>> {
        let k = self.k.k;
        let (rho, phi) = r.polar_about(&s.center);
        let (rho_s, phi_s) = src.polar_about(&s.center);
        let h_src = specfun::hankel2_seq(top as u32, k * rho_s)?;
        let h_rcv = specfun::hankel2_seq(top as u32, k * rho)?;
        let dphi = phi - phi_s;
        (0..=top)
            .map(|n| {
                let weight = if n == 0 { 1.0 } else { 2.0 };
                let term = -self.neumann_ratio[n] * h_src[n] * h_rcv[n] * (weight * (n as f64 * dphi).cos());
                if term.re.is_finite() && term.im.is_finite() {
                    Ok(term)
                } else {
                    Err(Error::Convergence { max_order: n })
                }
            })
            .collect()
    }

    fn scattered(&self, s: &Disk, src: &Point, r: &Point, incident: f64) -> Result<Complex64> {
        let mut order = self.initial_order(r);
        loop {
            let terms = self.series_terms(s, src, r, order + SERIES_TAIL_BLOCK)?;
            let head: Complex64 = terms[..=order].iter().sum();
            let tail: Complex64 = terms[order + 1..].iter().sum();
            let head = Complex64::new(0.0, -0.25) * head;
            if 0.25 * tail.norm() <= SERIES_TAIL_TOL * (head.norm() + incident) {
                return Ok(head);
            }
            if order >= SERIES_MAX_ORDER {
                return Err(Error::Convergence { max_order: order });
            }
            order = (order + SERIES_TAIL_BLOCK).min(SERIES_MAX_ORDER);
        }
    }

    pub fn transfer_matrix(&self) -> Result<DMatrix<Complex64>> {
        let sc = &self.scene;
        let mut g = DMatrix::zeros(sc.num_error(), sc.num_secondary());
        for (m, mic) in sc.error_mics.iter().enumerate() {
            for (l, src) in sc.secondary_sources.iter().enumerate() {
                g[(m, l)] = self.pressure(src, mic)?;
            }
        }
        Ok(g)
    }
}

/// `J_n'(x) / H_n^(2)'(x)` for n = 0..=130, truncated where H' overflows
/// (the ratio there is far below double precision).
fn neumann_ratios(x: f64) -> Result<Vec<Complex64>> {
    let mut nmax = (SERIES_MAX_ORDER + SERIES_TAIL_BLOCK) as u32;
    let dh = loop {
        match specfun::hankel2_deriv_seq(nmax, x) {
            Ok(v) => break v,
            Err(Error::Overflow { order, .. }) if order > 2 => nmax = order.saturating_sub(3).min(nmax - 1),
            Err(e) => return Err(e),
        }
    };
    let dj = specfun::bessel_j_deriv_seq(nmax, x)?;
    let mut ratio: Vec<Complex64> = dj.iter().zip(dh.iter()).map(|(j, h)| *j / *h).collect();
    ratio.resize(SERIES_MAX_ORDER + SERIES_TAIL_BLOCK + 1, Complex64::new(0.0, 0.0));
    Ok(ratio)
}

/// Ground-truth pressure at `r` from a unit source at `src`, scattering included.
pub fn pressure_true(scene: &SceneConfig, k: &Wavenumber, src: &Point, r: &Point) -> Result<Complex64> {
    FieldSolver::new(scene, *k)?.pressure(src, r)
}

/// M×L matrix of true secondary paths (loudspeaker l to error microphone m).
pub fn transfer_matrix_g(scene: &SceneConfig, k: &Wavenumber) -> Result<DMatrix<Complex64>> {
    FieldSolver::new(scene, *k)?.transfer_matrix()
}
