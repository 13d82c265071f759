//! TOML experiment description with `[scene]`, `[kernel]`, `[control]` and
//! `[run]` sections.
//!
//! The file form keeps array layouts symbolic (`layout = "circle"`) and is
//! what gets archived; [`ConfigFile::resolve`] turns it into an
//! [`ExperimentConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{Algorithm, StepParams};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, NlmsInit, DEFAULT_MAP_SPACING};
use crate::geometry::{Disk, Point};
use crate::kernel::{direction, KernelParams, Regularization};
use crate::quadrature::GridScheme;
use crate::scene::{circular_array, SceneConfig, TimeConvention, DEFAULT_SOUND_SPEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayLayout {
    Points {
        points: Vec<Point>,
    },
    Circle {
        #[serde(default = "origin")]
        center: Point,
        radius: f64,
        count: usize,
        #[serde(default)]
        start_angle: f64,
        /// Cycled over the elements, e.g. `[0.03, -0.03]` alternates in and out.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        radial_offsets: Vec<f64>,
    },
}

fn origin() -> Point {
    Point::ORIGIN
}

impl ArrayLayout {
    pub fn positions(&self) -> Vec<Point> {
        match self {
            ArrayLayout::Points { points } => points.clone(),
            ArrayLayout::Circle {
                center,
                radius,
                count,
                start_angle,
                radial_offsets,
            } => circular_array(*center, *radius, *count, *start_angle, radial_offsets),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    #[serde(default)]
    pub convention: TimeConvention,
    pub target_region: Disk,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatterer: Option<Disk>,
    pub primary_sources: Vec<Point>,
    pub error_mics: Vec<Point>,
    pub secondary_sources: ArrayLayout,
    pub reference_mics: ArrayLayout,
}

fn default_sound_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKeyword {
    /// From the target-region center toward the first primary source.
    TowardSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Keyword(DirectionKeyword),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub beta: f64,
    #[serde(default = "default_direction")]
    pub eta: DirectionSpec,
    #[serde(default)]
    pub regularization: Regularization,
}

fn default_direction() -> DirectionSpec {
    DirectionSpec::Keyword(DirectionKeyword::TowardSource)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub algorithms: Vec<Algorithm>,
    pub mu0: f64,
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(default)]
    pub nlms_init: NlmsInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencySpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl FrequencySpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            FrequencySpec::List(ref v) => Ok(v.clone()),
            FrequencySpec::Range { start, stop, step } => {
                if !(step > 0.0 && stop >= start) {
                    return Err(Error::Config(format!(
                        "frequency range needs step > 0 and stop >= start (start {start}, stop {stop}, step {step})"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + step * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub frequencies: FrequencySpec,
    pub iterations: usize,
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_grid: Option<GridScheme>,
    #[serde(default = "default_map_grid")]
    pub map_grid: GridScheme,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<usize>,
}

fn default_map_grid() -> GridScheme {
    GridScheme::Lattice {
        spacing: DEFAULT_MAP_SPACING,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scene: SceneSection,
    pub kernel: KernelSection,
    pub control: ControlSection,
    pub run: RunSection,
}

impl std::str::FromStr for ConfigFile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn scene(&self) -> SceneConfig {
        let s = &self.scene;
        SceneConfig {
            primary_sources: s.primary_sources.clone(),
            secondary_sources: s.secondary_sources.positions(),
            reference_mics: s.reference_mics.positions(),
            error_mics: s.error_mics.clone(),
            scatterer: s.scatterer,
            target_region: s.target_region,
            sound_speed: s.sound_speed,
            convention: s.convention,
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let scene = self.scene();
        let eta = match &self.kernel.eta {
            DirectionSpec::Vector(v) => v.clone(),
            DirectionSpec::Keyword(DirectionKeyword::TowardSource) => {
                let src = scene
                    .primary_sources
                    .first()
                    .ok_or_else(|| Error::Config("eta = \"toward_source\" needs a primary source".into()))?;
                direction(&scene.target_region.center, src)
            }
        };
        let kernel = KernelParams::new(self.kernel.beta, eta, self.kernel.regularization)
            .map_err(|e| Error::Config(format!("[kernel] {e}")))?;
        let c = &self.control;
        let config = ExperimentConfig {
            scene,
            frequencies: self.run.frequencies.values()?,
            iterations: self.run.iterations,
            snr_db: self.run.snr_db,
            algorithms: c.algorithms.clone(),
            step: StepParams {
                mu0: c.mu0,
                epsilon: c.epsilon,
                gamma: c.gamma,
            },
            kernel,
            grid: self.run.grid,
            eval_grid: self.run.eval_grid,
            map_grid: self.run.map_grid,
            seed: self.run.seed,
            nlms_init: c.nlms_init,
            checkpoints: self.run.checkpoints.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    /// The benchmark setup: 400 Hz, all three algorithms, 10000 iterations.
    pub fn benchmark() -> Self {
        ConfigFile {
            scene: SceneSection {
                sound_speed: DEFAULT_SOUND_SPEED,
                convention: TimeConvention::Positive,
                target_region: Disk::new(Point::ORIGIN, 0.5),
                scatterer: Some(Disk::new(Point::ORIGIN, 0.15)),
                primary_sources: vec![Point::new(-3.5, 0.2)],
                error_mics: vec![Point::new(0.3, 0.0), Point::new(-0.3, 0.0)],
                secondary_sources: ArrayLayout::Circle {
                    center: Point::ORIGIN,
                    radius: 1.0,
                    count: 12,
                    start_angle: 0.0,
                    radial_offsets: vec![],
                },
                reference_mics: ArrayLayout::Circle {
                    center: Point::ORIGIN,
                    radius: 2.0,
                    count: 6,
                    start_angle: 0.0,
                    radial_offsets: vec![0.03, -0.03],
                },
            },
            kernel: KernelSection {
                beta: 6.0,
                eta: default_direction(),
                regularization: Regularization::default(),
            },
            control: ControlSection {
                algorithms: Algorithm::ALL.to_vec(),
                mu0: 0.1,
                epsilon: 1e-8,
                gamma: 0.9,
                nlms_init: NlmsInit::Zero,
            },
            run: RunSection {
                frequencies: FrequencySpec::List(vec![400.0]),
                iterations: 10_000,
                snr_db: 40.0,
                seed: 2024,
                grid: GridScheme::default(),
                eval_grid: None,
                map_grid: default_map_grid(),
                checkpoints: vec![],
            },
        }
    }
}
