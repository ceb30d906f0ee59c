use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::denoiser::{paas, Conditioning, DenoiserSpec, NoiseSchedule};
use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};
use crate::imaging::{silhouette_iou, Image, Mask};
use crate::render::{self, CameraPose, DensityGrid, RenderOutput};
use crate::rng;

/// Distribution of prior viewpoints: uniform azimuth and elevation ranges in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSampler {
    pub azimuth: [f64; 2],
    pub elevation: [f64; 2],
}

impl Default for ViewSampler {
    fn default() -> Self {
        ViewSampler {
            azimuth: [0.0, 360.0],
            elevation: [-10.0, 45.0],
        }
    }
}

impl ViewSampler {
    pub fn sample(&self, r: &mut rng::Rng) -> (f64, f64) {
        let az = self.azimuth[0] + r.random::<f64>() * (self.azimuth[1] - self.azimuth[0]);
        let el = self.elevation[0] + r.random::<f64>() * (self.elevation[1] - self.elevation[0]);
        (az, el)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    pub lambda_rgb: f64,
    pub lambda_mask: f64,
    /// Weight of the genus-conditioned 2D prior.
    pub alpha: f64,
    /// Weight of the view-conditioned 3D prior.
    pub beta: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub iterations: usize,
    pub paas_samples: usize,
    pub view_sampler: ViewSampler,
    pub schedule: NoiseSchedule,
    pub rng_seed: u64,
    pub grid_resolution: usize,
    pub grid_extent: Aabb,
    pub init_density: f64,
    pub init_albedo: [f64; 3],
    pub render_steps: usize,
    /// Side length of the square prior-view renders fed to the denoisers.
    pub prior_image_size: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            lambda_rgb: 5.0,
            lambda_mask: 20.0,
            alpha: 1.0,
            beta: 8.0,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            iterations: 2000,
            paas_samples: 1,
            view_sampler: ViewSampler::default(),
            schedule: NoiseSchedule::default(),
            rng_seed: 0,
            grid_resolution: 64,
            grid_extent: default_extent(),
            init_density: 0.25,
            init_albedo: [0.5; 3],
            render_steps: 128,
            prior_image_size: 32,
        }
    }
}

/// 2 m cube standing on the ground plane z = 0.
pub fn default_extent() -> Aabb {
    Aabb::new(Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, 1.0, 2.0))
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.lambda_rgb, self.lambda_mask, self.alpha, self.beta];
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(ArborError::invalid("loss weights must be finite and non-negative"));
        }
        if !(self.lr > 0.0) {
            return Err(ArborError::invalid("learning rate must be positive"));
        }
        if self.iterations == 0 || self.paas_samples == 0 {
            return Err(ArborError::invalid("iterations and paas_samples must be at least 1"));
        }
        if self.grid_resolution == 0 || self.prior_image_size == 0 || self.render_steps < 2 {
            return Err(ArborError::invalid(
                "grid resolution, prior size and render steps must be positive",
            ));
        }
        self.schedule.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn front_pose(&self, width: usize, height: usize) -> CameraPose {
        CameraPose::front(&self.grid_extent, width, height)
    }

    pub fn initial_grid(&self) -> Result<DensityGrid> {
        DensityGrid::new(
            [self.grid_resolution; 3],
            self.grid_extent,
            self.init_density,
            self.init_albedo,
        )
    }
}

/// Reconstruction loss value with its image-space gradients.
#[derive(Debug, Clone)]
pub struct RecLoss {
    pub value: f64,
    pub rgb_term: f64,
    pub mask_term: f64,
    pub d_rgb: Vec<f64>,
    pub d_mask: Vec<f64>,
}

/// `λ_rgb ‖M(I) ⊙ (I − T)‖² + λ_mask ‖M(I) − M(T)‖²`.
///
/// A single-channel `img` is compared against the channel mean of the render.
pub fn loss_rec(img: &Image, mask: &Mask, out: &RenderOutput, lambda_rgb: f64, lambda_mask: f64) -> Result<RecLoss> {
    let (w, h) = (out.mask.width(), out.mask.height());
    if img.width() != w || img.height() != h || mask.width() != w || mask.height() != h {
        return Err(ArborError::invalid(format!(
            "render is {w}x{h} but image is {}x{} and mask {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    let rendered = out.rgb.pixels();
    let mut d_rgb = vec![0.0; 3 * w * h];
    let mut d_mask = vec![0.0; w * h];
    let (mut rgb_term, mut mask_term) = (0.0, 0.0);
    for p in 0..w * h {
        let m = mask.values()[p];
        let m2 = m * m;
        if img.channels() == 3 {
            for c in 0..3 {
                let diff = img.pixels()[3 * p + c] - rendered[3 * p + c];
                rgb_term += m2 * diff * diff;
                d_rgb[3 * p + c] = -2.0 * lambda_rgb * m2 * diff;
            }
        } else {
            let gray = (rendered[3 * p] + rendered[3 * p + 1] + rendered[3 * p + 2]) / 3.0;
            let diff = img.pixels()[p] - gray;
            rgb_term += m2 * diff * diff;
            for c in 0..3 {
                d_rgb[3 * p + c] = -2.0 * lambda_rgb * m2 * diff / 3.0;
            }
        }
        let diff = m - out.mask.values()[p];
        mask_term += diff * diff;
        d_mask[p] = -2.0 * lambda_mask * diff;
    }
    Ok(RecLoss {
        value: lambda_rgb * rgb_term + lambda_mask * mask_term,
        rgb_term,
        mask_term,
        d_rgb,
        d_mask,
    })
}

#[derive(Debug, Clone)]
pub struct PriorGradient {
    /// Gradient of `-log p_σ(T_π(θ))` with respect to the grid parameters.
    pub grad: Vec<f64>,
    /// The PAAS score at the rendered image.
    pub score: Vec<f64>,
    /// `-log p_σ` at the rendered image, for analytic priors.
    pub neg_log_density: Option<f64>,
    pub render: RenderOutput,
}

/// Score-distillation gradient of one prior term at one viewpoint: render,
/// estimate the score by PAAS, and pull `-score` back through the renderer.
pub fn loss_prior_grad(
    spec: &DenoiserSpec,
    grid: &DensityGrid,
    pose: &CameraPose,
    steps: usize,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PriorGradient> {
    let out = render::render(grid, pose, steps)?;
    let x = out.rgb.pixels();
    let score = paas(spec, x, sigma, n_samples, seed)?;
    let d_rgb: Vec<f64> = score.iter().map(|s| -s).collect();
    let d_mask = vec![0.0; out.mask.values().len()];
    let grad = out.backward(grid, &d_rgb, &d_mask)?;
    let neg_log_density = if spec.is_analytic() {
        Some(-spec.log_density(x, sigma)?)
    } else {
        None
    };
    Ok(PriorGradient {
        grad,
        score,
        neg_log_density,
        render: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub rec: f64,
    pub prior2d: f64,
    pub prior3d: f64,
    pub total: f64,
    pub sigma: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: DensityGrid,
    pub history: Vec<LossRecord>,
    pub input_pose: CameraPose,
}

impl Reconstruction {
    /// Silhouette IoU of the final front-view render against `mask`.
    pub fn front_iou(&self, mask: &Mask, steps: usize) -> Result<f64> {
        let out = render::render(&self.grid, &self.input_pose, steps)?;
        silhouette_iou(&out.mask, mask, 0.5)
    }
}

fn check_prior(spec: &DenoiserSpec, dim: usize, name: &str) -> Result<()> {
    spec.validate()?;
    if let Some(d) = super::Denoiser::dim(spec) {
        if d != dim {
            return Err(ArborError::invalid(format!(
                "{name} prior has dimension {d}, prior renders have {dim}"
            )));
        }
    }
    Ok(())
}

/// Minimizes `L_rec + α L_2D + β L_3D` over the grid parameters with Adam.
///
/// Each iteration renders the input view for the reconstruction term and,
/// when a prior weight is non-zero, one random prior viewpoint and one
/// noise level shared by both prior terms.
pub fn reconstruct(
    img: &Image,
    mask: &Mask,
    genus: &str,
    spec2d: &DenoiserSpec,
    spec3d: &DenoiserSpec,
    cfg: &ReconConfig,
) -> Result<Reconstruction> {
    cfg.validate()?;
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(ArborError::invalid("image and mask dimensions differ"));
    }
    let prior_dim = 3 * cfg.prior_image_size * cfg.prior_image_size;
    if cfg.alpha > 0.0 {
        check_prior(spec2d, prior_dim, "2D")?;
        if let Conditioning::Genus { label } = &spec2d.conditioning {
            if !label.eq_ignore_ascii_case(genus) {
                return Err(ArborError::invalid(format!(
                    "2D prior is conditioned on genus '{label}', reconstruction requested '{genus}'"
                )));
            }
        }
    }
    if cfg.beta > 0.0 {
        check_prior(spec3d, prior_dim, "3D")?;
    }

    let mut grid = cfg.initial_grid()?;
    let mut adam = Adam::new(cfg.adam(), grid.params().len());
    let input_pose = cfg.front_pose(img.width(), img.height());
    let prior_base = cfg.front_pose(cfg.prior_image_size, cfg.prior_image_size);
    let mut r = rng::substream(cfg.rng_seed, "distill");
    let mut history = Vec::with_capacity(cfg.iterations);
    let use_priors = cfg.alpha > 0.0 || cfg.beta > 0.0;

    for iteration in 0..cfg.iterations {
        let out = render::render(&grid, &input_pose, cfg.render_steps)?;
        let rec = loss_rec(img, mask, &out, cfg.lambda_rgb, cfg.lambda_mask)?;
        let mut grad = out.backward(&grid, &rec.d_rgb, &rec.d_mask)?;

        let mut record = LossRecord {
            iteration,
            rec: rec.value,
            prior2d: 0.0,
            prior3d: 0.0,
            total: rec.value,
            sigma: f64::NAN,
            azimuth: f64::NAN,
            elevation: f64::NAN,
        };

        if use_priors {
            let (az, el) = cfg.view_sampler.sample(&mut r);
            let sigma = cfg.schedule.sample(&mut r);
            let (seed2d, seed3d): (u64, u64) = (r.random(), r.random());
            let pose = prior_base.with_azimuth(az).with_elevation(el);
            let view = render::render(&grid, &pose, cfg.render_steps)?;
            let x = view.rgb.pixels();
            let mut d_rgb = vec![0.0; x.len()];
            if cfg.alpha > 0.0 {
                let s = paas(spec2d, x, sigma, cfg.paas_samples, seed2d)?;
                for (d, s) in d_rgb.iter_mut().zip(&s) {
                    *d -= cfg.alpha * s;
                }
                record.prior2d = prior_value(spec2d, x, sigma)?;
            }
            if cfg.beta > 0.0 {
                let s = paas(spec3d, x, sigma, cfg.paas_samples, seed3d)?;
                for (d, s) in d_rgb.iter_mut().zip(&s) {
                    *d -= cfg.beta * s;
                }
                record.prior3d = prior_value(spec3d, x, sigma)?;
            }
            let d_mask = vec![0.0; view.mask.values().len()];
            let prior_grad = view.backward(&grid, &d_rgb, &d_mask)?;
            for (g, p) in grad.iter_mut().zip(&prior_grad) {
                *g += p;
            }
            record.sigma = sigma;
            record.azimuth = az;
            record.elevation = el;
            record.total += cfg.alpha * record.prior2d + cfg.beta * record.prior3d;
        }

        if !record.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(ArborError::NonFiniteLoss {
                iteration,
                rec: record.rec,
                prior2d: record.prior2d,
                prior3d: record.prior3d,
            });
        }
        history.push(record);
        adam.step(grid.params_mut(), &grad);
    }

    Ok(Reconstruction {
        grid,
        history,
        input_pose,
    })
}

fn prior_value(spec: &DenoiserSpec, x: &[f64], sigma: f64) -> Result<f64> {
    if spec.is_analytic() {
        Ok(-spec.log_density(x, sigma)?)
    } else {
        Ok(f64::NAN)
    }
}

/// Synthetic target: a centered disk of `color` on a white background.
pub fn disk_target(size: usize, radius_px: f64, color: [f64; 3]) -> (Image, Mask) {
    let c = size as f64 / 2.0;
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        dx * dx + dy * dy <= radius_px * radius_px
    };
    let img = Image::from_fn(
        size,
        size,
        3,
        |x, y| if inside(x, y) { color.to_vec() } else { vec![1.0; 3] },
    )
    .expect("disk colors lie in [0, 1]");
    let mask = Mask::from_fn(size, size, |x, y| if inside(x, y) { 1.0 } else { 0.0 }).expect("binary mask");
    (img, mask)
}

/// Isotropic Gaussian prior centred on `img` resampled to `size`x`size` RGB.
pub fn image_prior(img: &Image, size: usize, s: f64, conditioning: Conditioning) -> Result<DenoiserSpec> {
    let small = img.resize(size, size);
    let mean: Vec<f64> = if small.channels() == 3 {
        small.pixels().to_vec()
    } else {
        small.pixels().iter().flat_map(|&v| [v, v, v]).collect()
    };
    Ok(DenoiserSpec::isotropic(mean, s)?.with_conditioning(conditioning))
}

/// Isotropic Gaussian prior with a constant mean image.
pub fn constant_prior(size: usize, value: [f64; 3], s: f64, conditioning: Conditioning) -> Result<DenoiserSpec> {
    let mean: Vec<f64> = (0..size * size).flat_map(|_| value).collect();
    Ok(DenoiserSpec::isotropic(mean, s)?.with_conditioning(conditioning))
}
