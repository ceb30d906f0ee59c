//! Emission-absorption volume rendering of a [`DensityGrid`] with exact
//! reverse-mode gradients.
//!
//! Each pixel ray is clipped to the grid extent and sampled at `steps`
//! equally spaced midpoints. Density and albedo are trilinearly
//! interpolated from voxel centers (clamped at the border). With
//! `τ_i = σ_i Δt` and `T_i = exp(-Σ_{j<i} τ_j)`, the pixel color is
//! `Σ T_i (1 - e^{-τ_i}) c_i + T_N · white` and the opacity mask is `1 - T_N`.

mod camera;
mod grid;

pub use camera::{CameraPose, RayGen};
pub use grid::{logistic, logit, softplus, softplus_inv, DensityGrid, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rayon::prelude::*;

use crate::error::{ArborError, Result};
use crate::geom::Vec3;
use crate::imaging::{Image, Mask};

/// Fixed number of row blocks whose gradients are summed in order, so the
/// reduction is identical whatever the thread count.
const REDUCTION_BLOCKS: usize = 8;

const BACKGROUND: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub rgb: Image,
    pub mask: Mask,
    pub pose: CameraPose,
    pub steps: usize,
}

impl RenderOutput {
    /// Pulls image-space gradients back to the parameters of `grid`, which
    /// must be the grid this output was rendered from.
    pub fn backward(&self, grid: &DensityGrid, d_rgb: &[f64], d_mask: &[f64]) -> Result<Vec<f64>> {
        backward(grid, &self.pose, self.steps, d_rgb, d_mask)
    }
}

/// Activated voxel values, computed once per render.
struct Fields {
    density: Vec<f64>,
    albedo: Vec<f64>,
}

impl Fields {
    fn new(grid: &DensityGrid) -> Self {
        let n = grid.voxel_count();
        let p = grid.params();
        Fields {
            density: p[..n].iter().map(|&v| softplus(v)).collect(),
            albedo: p[n..].iter().map(|&v| logistic(v)).collect(),
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Sample {
    corners: [usize; 8],
    weights: [f64; 8],
}

struct Sampler {
    min: Vec3,
    inv_voxel: Vec3,
    res: [usize; 3],
}

impl Sampler {
    fn new(grid: &DensityGrid) -> Self {
        let vs = grid.voxel_size();
        Sampler {
            min: grid.extent().min,
            inv_voxel: Vec3::new(1.0 / vs.x, 1.0 / vs.y, 1.0 / vs.z),
            res: grid.resolution(),
        }
    }

    fn sample(&self, p: Vec3) -> Sample {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let rel = p - self.min;
        for axis in 0..3 {
            let n = self.res[axis];
            let u = (rel[axis] * self.inv_voxel[axis] - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n.saturating_sub(2));
            lo[axis] = i0;
            hi[axis] = (i0 + 1).min(n - 1);
            frac[axis] = if hi[axis] == i0 { 0.0 } else { u - i0 as f64 };
        }
        let [nx, ny, _] = self.res;
        let mut s = Sample::default();
        for k in 0..8 {
            let (bx, by, bz) = (k & 1, (k >> 1) & 1, (k >> 2) & 1);
            let x = if bx == 1 { hi[0] } else { lo[0] };
            let y = if by == 1 { hi[1] } else { lo[1] };
            let z = if bz == 1 { hi[2] } else { lo[2] };
            let wx = if bx == 1 { frac[0] } else { 1.0 - frac[0] };
            let wy = if by == 1 { frac[1] } else { 1.0 - frac[1] };
            let wz = if bz == 1 { frac[2] } else { 1.0 - frac[2] };
            s.corners[k] = x + nx * (y + ny * z);
            s.weights[k] = wx * wy * wz;
        }
        s
    }
}

/// Per-sample values along one ray.
#[derive(Clone, Copy, Default)]
struct RaySample {
    sample: Sample,
    sigma: f64,
    color: [f64; 3],
}

struct Ray {
    dt: f64,
    samples: Vec<RaySample>,
}

fn march(
    grid: &DensityGrid,
    sampler: &Sampler,
    fields: &Fields,
    origin: Vec3,
    dir: Vec3,
    steps: usize,
    out: &mut Ray,
) -> bool {
    out.samples.clear();
    let Some((t0, t1)) = grid.extent().intersect_ray(origin, dir) else {
        return false;
    };
    if t1 <= t0 {
        return false;
    }
    out.dt = (t1 - t0) / steps as f64;
    for k in 0..steps {
        let p = origin + dir * (t0 + (k as f64 + 0.5) * out.dt);
        let sample = sampler.sample(p);
        let mut sigma = 0.0;
        let mut color = [0.0; 3];
        for (&v, &w) in sample.corners.iter().zip(&sample.weights) {
            sigma += w * fields.density[v];
            for (c, col) in color.iter_mut().enumerate() {
                *col += w * fields.albedo[3 * v + c];
            }
        }
        out.samples.push(RaySample { sample, sigma, color });
    }
    true
}

/// Composites one marched ray; returns `(rgb, opacity)`.
fn composite(ray: &Ray) -> ([f64; 3], f64) {
    let mut trans = 1.0;
    let mut rgb = [0.0; 3];
    for s in &ray.samples {
        let next = trans * (-s.sigma * ray.dt).exp();
        let w = trans - next;
        for c in 0..3 {
            rgb[c] += w * s.color[c];
        }
        trans = next;
    }
    for v in &mut rgb {
        *v += trans * BACKGROUND;
    }
    (rgb, 1.0 - trans)
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 2 {
        return Err(ArborError::invalid("render steps must be at least 2"));
    }
    Ok(())
}

/// Renders color and opacity mask of `grid` seen from `pose`.
pub fn render(grid: &DensityGrid, pose: &CameraPose, steps: usize) -> Result<RenderOutput> {
    check_steps(steps)?;
    let extent = grid.extent();
    pose.validate(&extent)?;
    let rays = pose.rays(&extent);
    let fields = Fields::new(grid);
    let sampler = Sampler::new(grid);
    let (w, h) = (pose.width, pose.height);

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut ray = Ray {
                dt: 0.0,
                samples: Vec::with_capacity(steps),
            };
            let mut rgb = Vec::with_capacity(3 * w);
            let mut mask = Vec::with_capacity(w);
            for x in 0..w {
                let (c, m) = if march(grid, &sampler, &fields, rays.eye, rays.direction(x, y), steps, &mut ray) {
                    composite(&ray)
                } else {
                    ([BACKGROUND; 3], 0.0)
                };
                rgb.extend(c.iter().map(|v| v.clamp(0.0, 1.0)));
                mask.push(m.clamp(0.0, 1.0));
            }
            (rgb, mask)
        })
        .collect();

    let mut rgb = Vec::with_capacity(3 * w * h);
    let mut mask = Vec::with_capacity(w * h);
    for (r, m) in rows {
        rgb.extend(r);
        mask.extend(m);
    }
    Ok(RenderOutput {
        rgb: Image::from_raw(w, h, 3, rgb),
        mask: Mask::from_raw(w, h, mask),
        pose: *pose,
        steps,
    })
}

/// Gradient of `Σ d_rgb · rgb + Σ d_mask · mask` with respect to
/// [`DensityGrid::params`].
pub fn backward(
    grid: &DensityGrid,
    pose: &CameraPose,
    steps: usize,
    d_rgb: &[f64],
    d_mask: &[f64],
) -> Result<Vec<f64>> {
    check_steps(steps)?;
    let extent = grid.extent();
    pose.validate(&extent)?;
    let (w, h) = (pose.width, pose.height);
    if d_rgb.len() != 3 * w * h || d_mask.len() != w * h {
        return Err(ArborError::invalid(
            "upstream gradient size does not match the render size",
        ));
    }
    let rays = pose.rays(&extent);
    let fields = Fields::new(grid);
    let sampler = Sampler::new(grid);
    let n = grid.voxel_count();
    let blocks = REDUCTION_BLOCKS.min(h);

    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let (y0, y1) = (b * h / blocks, (b + 1) * h / blocks);
            // d(loss)/d(density) and d(loss)/d(albedo) per voxel
            let mut acc = vec![0.0; 4 * n];
            let mut ray = Ray {
                dt: 0.0,
                samples: Vec::with_capacity(steps),
            };
            let mut trans = vec![0.0; steps + 1];
            for y in y0..y1 {
                for x in 0..w {
                    let p = y * w + x;
                    let g = [d_rgb[3 * p], d_rgb[3 * p + 1], d_rgb[3 * p + 2]];
                    let gm = d_mask[p];
                    if g == [0.0; 3] && gm == 0.0 {
                        continue;
                    }
                    if !march(grid, &sampler, &fields, rays.eye, rays.direction(x, y), steps, &mut ray) {
                        continue;
                    }
                    backprop_ray(&ray, g, gm, &mut trans, &mut acc, n);
                }
            }
            acc
        })
        .collect();

    let mut grad = vec![0.0; 4 * n];
    for part in &partials {
        for (g, v) in grad.iter_mut().zip(part) {
            *g += v;
        }
    }
    let params = grid.params();
    for v in 0..n {
        grad[v] *= logistic(params[v]); // softplus'
    }
    for i in n..4 * n {
        let a = logistic(params[i]);
        grad[i] *= a * (1.0 - a);
    }
    Ok(grad)
}

fn backprop_ray(ray: &Ray, g: [f64; 3], gm: f64, trans: &mut [f64], acc: &mut [f64], n: usize) {
    let m = ray.samples.len();
    trans[0] = 1.0;
    for (i, s) in ray.samples.iter().enumerate() {
        trans[i + 1] = trans[i] * (-s.sigma * ray.dt).exp();
    }
    let t_final = trans[m];
    // suffix[c] = Σ_{k>i} w_k c_k + T_N · background
    let mut suffix = [t_final * BACKGROUND; 3];
    for i in (0..m).rev() {
        let s = &ray.samples[i];
        let w = trans[i] - trans[i + 1];
        let mut d_tau = gm * t_final;
        for c in 0..3 {
            d_tau += g[c] * (trans[i + 1] * s.color[c] - suffix[c]);
        }
        let d_sigma = d_tau * ray.dt;
        for (&v, &cw) in s.sample.corners.iter().zip(&s.sample.weights) {
            if cw == 0.0 {
                continue;
            }
            acc[v] += cw * d_sigma;
            for c in 0..3 {
                acc[n + 3 * v + c] += cw * g[c] * w;
            }
        }
        for c in 0..3 {
            suffix[c] += w * s.color[c];
        }
    }
}

/// `n` renders at azimuths `0, 360/n, ...` sharing the elevation, radius,
/// field of view and size of `base`.
pub fn render_views(grid: &DensityGrid, base: &CameraPose, n: usize, steps: usize) -> Result<Vec<RenderOutput>> {
    if n == 0 {
        return Err(ArborError::invalid("render_views needs at least one view"));
    }
    view_azimuths(n)
        .into_iter()
        .map(|az| render(grid, &base.with_azimuth(az), steps))
        .collect()
}

pub fn view_azimuths(n: usize) -> Vec<f64> {
    (0..n).map(|i| 360.0 * i as f64 / n as f64).collect()
}
