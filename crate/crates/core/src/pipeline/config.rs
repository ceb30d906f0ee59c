use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distill::{constant_prior, image_prior, Conditioning, DenoiserSpec, ReconConfig, DEFAULT_RATIOS};
use crate::envelope::{OccupancyVolume, DEFAULT_MARKER_DENSITY};
use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};
use crate::growth::{self, GenusParams, Obstacle};
use crate::imaging::Image;
use crate::metrics::Normalization;
use crate::phenotype::PhenotypeOptions;

/// Everything a pipeline run needs besides its input files. Missing fields
/// take their defaults, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub curate: CurateConfig,
    pub recon: ReconConfig,
    /// Input images are downscaled so their longer side is at most this.
    pub working_size: usize,
    pub prior2d: PriorSource,
    pub prior3d: PriorSource,
    pub genera: Vec<GenusParams>,
    pub envelope: EnvelopeConfig,
    pub growth: GrowthConfig,
    pub phenotype: PhenotypeOptions,
    pub metrics: MetricsConfig,
    pub ablation: AblationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            curate: CurateConfig::default(),
            recon: ReconConfig::default(),
            working_size: 64,
            prior2d: PriorSource::InputImage { s: 0.5 },
            prior3d: PriorSource::InputImage { s: 0.25 },
            genera: growth::presets(),
            envelope: EnvelopeConfig::default(),
            growth: GrowthConfig::default(),
            phenotype: PhenotypeOptions::default(),
            metrics: MetricsConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.recon.validate()?;
        if self.working_size == 0 {
            return Err(ArborError::invalid("working_size must be positive"));
        }
        for g in &self.genera {
            g.validate()?;
        }
        for o in &self.growth.obstacles {
            if let ObstacleSpec::Wall { normal, .. } = o {
                if !((normal.norm() - 1.0).abs() < 1e-9) {
                    return Err(ArborError::invalid("wall normal must be a unit vector"));
                }
            }
        }
        Ok(())
    }

    pub fn genus(&self, name: &str) -> Result<GenusParams> {
        growth::lookup(&self.genera, name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurateConfig {
    pub threshold: f64,
    pub patch: usize,
}

impl Default for CurateConfig {
    fn default() -> Self {
        CurateConfig {
            threshold: 1e-3,
            patch: 32,
        }
    }
}

/// Where a denoiser prior comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriorSource {
    /// Isotropic Gaussian centered on the (resized) input image.
    InputImage { s: f64 },
    /// Isotropic Gaussian with a constant mean color.
    Constant { value: [f64; 3], s: f64 },
    /// A serialized denoiser spec.
    File { path: PathBuf },
}

impl PriorSource {
    /// Builds the spec. Analytic sources get `conditioning`; file specs keep
    /// their own.
    pub fn build(&self, input: &Image, size: usize, conditioning: Conditioning) -> Result<DenoiserSpec> {
        match self {
            PriorSource::InputImage { s } => image_prior(input, size, *s, conditioning),
            PriorSource::Constant { value, s } => constant_prior(size, *value, *s, conditioning),
            PriorSource::File { path } => {
                let spec: DenoiserSpec = serde_json::from_slice(&std::fs::read(path)?)?;
                spec.validate()?;
                Ok(spec)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeConfig {
    /// Occupancy threshold; half the 99th-percentile density when unset.
    pub tau: Option<f64>,
    /// Markers per cubic meter of envelope.
    pub marker_density: f64,
    /// Trunk base; below the envelope centroid on the ground when unset.
    pub anchor: Option<Vec3>,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            tau: None,
            marker_density: DEFAULT_MARKER_DENSITY,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleSpec {
    Box {
        min: Vec3,
        max: Vec3,
    },
    /// Solid where `(p - point) · normal < 0`.
    Wall {
        point: Vec3,
        normal: Vec3,
    },
    /// Occupancy file of another tree's envelope.
    Envelope {
        path: PathBuf,
    },
}

impl ObstacleSpec {
    pub fn resolve(&self) -> Result<Obstacle> {
        let o = match self {
            ObstacleSpec::Box { min, max } => Obstacle::Box(Aabb::new(*min, *max)),
            ObstacleSpec::Wall { point, normal } => Obstacle::HalfSpace {
                point: *point,
                normal: *normal,
            },
            ObstacleSpec::Envelope { path } => Obstacle::ForeignEnvelope(OccupancyVolume::read(path)?),
        };
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthConfig {
    pub obstacles: Vec<ObstacleSpec>,
    pub snapshots: Vec<usize>,
    pub mesh_sides: usize,
    /// Leaves per meter of thin branch; 0 disables foliage.
    pub leaf_density: f64,
    pub leaf_radius: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            obstacles: Vec::new(),
            snapshots: vec![0, 10, 20, 40],
            mesh_sides: 8,
            leaf_density: 40.0,
            leaf_radius: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub samples: usize,
    pub normalization: Normalization,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            samples: 4096,
            normalization: Normalization::UnitDiagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub ratios: Vec<f64>,
    /// Iterations per run; the reconstruction setting when unset.
    pub iterations: Option<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            ratios: DEFAULT_RATIOS.to_vec(),
            iterations: None,
        }
    }
}
