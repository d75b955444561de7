//! Parametric synthetic objectives used to generate desk-scale score tables.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ScoreTable;
use crate::rng::{self, tag};
use crate::{Error, GridSpec, Result};

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

fn half() -> f64 {
    0.5
}

/// Noiseless objective families, evaluated on coordinates scaled to `[0, 1]`.
/// Centers are given in 1-based grid coordinates and may be fractional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Landscape {
    /// `-curvature * sum_j (u_j - c_j)^2`.
    SeparableBowl {
        center: Vec<f64>,
        #[serde(default = "one")]
        curvature: f64,
    },
    /// A diagonal ridge rising towards the all-high corner:
    /// `slope * mean(u) - curvature * sum_j (u_j - mean(u))^2`.
    Ridge {
        #[serde(default = "one")]
        slope: f64,
        #[serde(default = "ten")]
        curvature: f64,
    },
    /// Flat top of Euclidean `radius` around `center`, then a linear descent.
    Plateau {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        slope: f64,
    },
    /// A broad bowl around `center` plus a single narrow spike at `spike`.
    DeceptiveSpike {
        center: Vec<f64>,
        spike: Vec<usize>,
        #[serde(default = "half")]
        height: f64,
        #[serde(default = "one")]
        curvature: f64,
    },
}

impl Landscape {
    pub fn bowl_centered(center: &[f64]) -> Self {
        Self::SeparableBowl {
            center: center.to_vec(),
            curvature: 1.0,
        }
    }

    fn validate(&self, spec: &GridSpec) -> Result<()> {
        let check_center = |c: &[f64]| {
            if c.len() != spec.dim() {
                return Err(Error::Config(format!(
                    "center has {} coordinates, grid has {} axes",
                    c.len(),
                    spec.dim()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("center must be finite".into()));
            }
            Ok(())
        };
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite")))
            }
        };
        match self {
            Self::SeparableBowl { center, curvature } => {
                check_center(center)?;
                finite("curvature", *curvature)
            }
            Self::Ridge { slope, curvature } => {
                finite("slope", *slope)?;
                finite("curvature", *curvature)
            }
            Self::Plateau {
                center,
                radius,
                slope,
            } => {
                check_center(center)?;
                finite("slope", *slope)?;
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::Config("radius must be finite and >= 0".into()));
                }
                Ok(())
            }
            Self::DeceptiveSpike {
                center,
                spike,
                height,
                curvature,
            } => {
                check_center(center)?;
                spec.to_linear(&crate::ArmIndex(spike.clone()))
                    .map_err(|e| Error::Config(format!("spike: {e}")))?;
                finite("height", *height)?;
                finite("curvature", *curvature)
            }
        }
    }

    fn unit_center(spec: &GridSpec, center: &[f64]) -> Vec<f64> {
        center
            .iter()
            .zip(spec.sizes())
            .map(|(&c, &n)| if n > 1 { (c - 1.0) / (n - 1) as f64 } else { 0.0 })
            .collect()
    }

    /// Objective value of a linear arm.
    pub fn value(&self, spec: &GridSpec, linear: usize) -> f64 {
        let u = spec.unit_coords(linear);
        let sq_dist = |center: &[f64]| -> f64 {
            let c = Self::unit_center(spec, center);
            u.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum()
        };
        match self {
            Self::SeparableBowl { center, curvature } => -curvature * sq_dist(center),
            Self::Ridge { slope, curvature } => {
                let mean = u.iter().sum::<f64>() / u.len() as f64;
                slope * mean - curvature * u.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            }
            Self::Plateau {
                center,
                radius,
                slope,
            } => -slope * (sq_dist(center).sqrt() - radius).max(0.0),
            Self::DeceptiveSpike {
                center,
                spike,
                height,
                curvature,
            } => {
                let bump = if spec.linear_unchecked(spike) == linear {
                    *height
                } else {
                    0.0
                };
                -curvature * sq_dist(center) + bump
            }
        }
    }
}

/// A synthetic table recipe: grid, objective, validation noise and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    pub grid: GridSpec,
    pub objective: Landscape,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LandscapeSpec {
    pub fn new(grid: GridSpec, objective: Landscape, noise_sd: f64, seed: u64) -> Self {
        Self {
            grid,
            objective,
            noise_sd,
            seed,
        }
    }

    /// Parses a JSON recipe; unknown objective families are config errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("landscape: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be finite and >= 0".into()));
        }
        self.objective.validate(&self.grid)
    }

    pub fn synthesize(&self, folds: usize) -> Result<ScoreTable> {
        synth_table(self, folds)
    }
}

/// Generates a complete table: test scores are the noiseless objective on
/// every fold; validation scores add `N(0, noise_sd)` noise drawn from a
/// stream keyed by `(seed, arm, fold)`.
pub fn synth_table(land: &LandscapeSpec, folds: usize) -> Result<ScoreTable> {
    if folds == 0 {
        return Err(Error::Config("fold count must be at least 1".into()));
    }
    land.validate()?;
    let noise = Normal::new(0.0, land.noise_sd)
        .map_err(|e| Error::Config(format!("noise_sd: {e}")))?;
    let spec = &land.grid;
    let values: Vec<f64> = (0..spec.len())
        .map(|k| land.objective.value(spec, k))
        .collect();
    ScoreTable::from_fn(spec.clone(), folds, |arm, fold| {
        let f = values[arm];
        let eps = if land.noise_sd > 0.0 {
            let mut rng = rng::stream(&[tag::FOLD_NOISE, land.seed, arm as u64, fold as u64]);
            noise.sample(&mut rng)
        } else {
            0.0
        };
        (f + eps, f)
    })
}
