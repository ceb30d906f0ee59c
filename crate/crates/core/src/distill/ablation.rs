use serde::{Deserialize, Serialize};

use super::denoiser::DenoiserSpec;
use super::recon::{reconstruct, ReconConfig};
use crate::error::Result;
use crate::imaging::{silhouette_iou, Image, Mask};
use crate::render::{self, render_views};

/// α/β ratios swept by default.
pub const DEFAULT_RATIOS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub ratio: f64,
    pub alpha: f64,
    pub beta: f64,
    pub final_rec: f64,
    pub final_prior2d: f64,
    pub final_prior3d: f64,
    /// Front-view silhouette IoU against the input mask.
    pub front_iou: f64,
    /// Mean IoU of the 90/180/270 degree silhouettes against the input mask.
    pub side_iou: f64,
    pub mean_brightness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub iterations: usize,
    pub rows: Vec<AblationRow>,
}

/// Runs one reconstruction per ratio with `alpha = ratio * base.beta`.
pub fn ablate(
    img: &Image,
    mask: &Mask,
    genus: &str,
    spec2d: &DenoiserSpec,
    spec3d: &DenoiserSpec,
    base: &ReconConfig,
    ratios: &[f64],
) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let cfg = ReconConfig {
            alpha: ratio * base.beta,
            ..base.clone()
        };
        let rec = reconstruct(img, mask, genus, spec2d, spec3d, &cfg)?;
        let last = rec.history.last().copied().expect("at least one iteration");
        let front = render::render(&rec.grid, &rec.input_pose, cfg.render_steps)?;
        let views = render_views(&rec.grid, &rec.input_pose, 4, cfg.render_steps)?;
        let mut side = 0.0;
        for v in &views[1..] {
            side += silhouette_iou(&v.mask, mask, 0.5)?;
        }
        let mean_brightness = views.iter().map(|v| v.rgb.mean()).sum::<f64>() / views.len() as f64;
        rows.push(AblationRow {
            ratio,
            alpha: cfg.alpha,
            beta: cfg.beta,
            final_rec: last.rec,
            final_prior2d: last.prior2d,
            final_prior3d: last.prior3d,
            front_iou: silhouette_iou(&front.mask, mask, 0.5)?,
            side_iou: side / 3.0,
            mean_brightness,
        });
    }
    Ok(AblationReport {
        iterations: base.iterations,
        rows,
    })
}
