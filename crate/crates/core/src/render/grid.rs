//! Dense density/albedo grid and its binary checkpoint format.
//!
//! Checkpoint layout (all little-endian):
//!
//! | offset | size    | field                                            |
//! |--------|---------|--------------------------------------------------|
//! | 0      | 8       | magic `b"ARBORGRD"`                              |
//! | 8      | 4       | `u32` version (= 1)                              |
//! | 12     | 12      | `u32` nx, ny, nz                                 |
//! | 24     | 24      | `f32` extent min xyz, then extent max xyz        |
//! | 48     | 4·n     | `f32` density parameters, x fastest, then y, z   |
//! | 48+4n  | 12·n    | `f32` albedo parameters, rgb interleaved per voxel |
//!
//! with `n = nx·ny·nz`. Parameters are stored unconstrained; density is
//! `softplus(p)` and albedo is `logistic(q)`.

use std::io::Read;
use std::path::Path;

use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ARBORGRD";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn softplus(p: f64) -> f64 {
    p.max(0.0) + (-p.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for `d > 0`.
pub fn softplus_inv(d: f64) -> f64 {
    d + (-(-d).exp_m1()).ln()
}

pub fn logistic(q: f64) -> f64 {
    if q >= 0.0 {
        1.0 / (1.0 + (-q).exp())
    } else {
        let e = q.exp();
        e / (1.0 + e)
    }
}

pub fn logit(a: f64) -> f64 {
    (a / (1.0 - a)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    resolution: [usize; 3],
    extent: Aabb,
    // [density params (n) | albedo params (3n)]
    params: Vec<f64>,
}

impl DensityGrid {
    /// Uniform grid with the given initial density (per meter) and albedo.
    pub fn new(resolution: [usize; 3], extent: Aabb, density: f64, albedo: [f64; 3]) -> Result<Self> {
        if resolution.contains(&0) {
            return Err(ArborError::invalid("grid resolution must be positive"));
        }
        if !extent.is_well_formed() || extent.volume() <= 0.0 {
            return Err(ArborError::invalid("grid extent must be a non-degenerate box"));
        }
        if !(density > 0.0) || albedo.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(ArborError::invalid("initial density must be > 0 and albedo in (0, 1)"));
        }
        let n = resolution[0] * resolution[1] * resolution[2];
        let mut params = vec![softplus_inv(density); n];
        params.reserve(3 * n);
        for _ in 0..n {
            params.extend(albedo.iter().map(|&a| logit(a)));
        }
        Ok(DensityGrid {
            resolution,
            extent,
            params,
        })
    }

    /// Builds a grid from per-voxel-center density and albedo functions.
    pub fn from_fn(
        resolution: [usize; 3],
        extent: Aabb,
        density: impl Fn(Vec3) -> f64,
        albedo: impl Fn(Vec3) -> [f64; 3],
    ) -> Result<Self> {
        let mut g = DensityGrid::new(resolution, extent, 1.0, [0.5; 3])?;
        for v in 0..g.voxel_count() {
            let c = g.voxel_center(v);
            g.set_density(v, density(c))?;
            g.set_albedo(v, albedo(c))?;
        }
        Ok(g)
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn extent(&self) -> Aabb {
        self.extent
    }

    pub fn voxel_count(&self) -> usize {
        self.resolution[0] * self.resolution[1] * self.resolution[2]
    }

    pub fn voxel_size(&self) -> Vec3 {
        let s = self.extent.size();
        Vec3::new(
            s.x / self.resolution[0] as f64,
            s.y / self.resolution[1] as f64,
            s.z / self.resolution[2] as f64,
        )
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution[0] * (y + self.resolution[1] * z)
    }

    pub fn coords(&self, v: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [v % nx, (v / nx) % ny, v / (nx * ny)]
    }

    pub fn voxel_center(&self, v: usize) -> Vec3 {
        let [x, y, z] = self.coords(v);
        let s = self.voxel_size();
        self.extent.min + Vec3::new((x as f64 + 0.5) * s.x, (y as f64 + 0.5) * s.y, (z as f64 + 0.5) * s.z)
    }

    /// All unconstrained parameters: `n` density params, then `3n` albedo params.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn density(&self, v: usize) -> f64 {
        softplus(self.params[v])
    }

    pub fn albedo(&self, v: usize) -> [f64; 3] {
        let n = self.voxel_count();
        let b = n + 3 * v;
        [
            logistic(self.params[b]),
            logistic(self.params[b + 1]),
            logistic(self.params[b + 2]),
        ]
    }

    pub fn set_density(&mut self, v: usize, d: f64) -> Result<()> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(ArborError::invalid("density must be finite and non-negative"));
        }
        // softplus never reaches zero; clamp to a negligible density.
        self.params[v] = softplus_inv(d.max(1e-12));
        Ok(())
    }

    pub fn set_albedo(&mut self, v: usize, a: [f64; 3]) -> Result<()> {
        let n = self.voxel_count();
        for (c, &val) in a.iter().enumerate() {
            let val = val.clamp(1e-6, 1.0 - 1e-6);
            self.params[n + 3 * v + c] = logit(val);
        }
        Ok(())
    }

    pub fn densities(&self) -> Vec<f64> {
        self.params[..self.voxel_count()].iter().map(|&p| softplus(p)).collect()
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(48 + 16 * self.voxel_count());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for r in self.resolution {
            buf.extend_from_slice(&(r as u32).to_le_bytes());
        }
        for v in [self.extent.min, self.extent.max] {
            for c in v.to_array() {
                buf.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        for &p in &self.params {
            buf.extend_from_slice(&(p as f32).to_le_bytes());
        }
        buf
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        crate::pipeline::write_atomic(path, &self.to_checkpoint_bytes())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_checkpoint_bytes(&bytes)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "grid checkpoint";
        if bytes.len() < 48 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(ArborError::format(FMT, "missing magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
        if u32_at(8) != CHECKPOINT_VERSION {
            return Err(ArborError::format(FMT, format!("unsupported version {}", u32_at(8))));
        }
        let resolution = [u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize];
        let extent = Aabb::new(
            Vec3::new(f32_at(24), f32_at(28), f32_at(32)),
            Vec3::new(f32_at(36), f32_at(40), f32_at(44)),
        );
        let n = resolution[0] * resolution[1] * resolution[2];
        if n == 0 || bytes.len() != 48 + 16 * n {
            return Err(ArborError::format(FMT, "payload size does not match resolution"));
        }
        let params: Vec<f64> = (0..4 * n).map(|i| f32_at(48 + 4 * i)).collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ArborError::format(FMT, "non-finite parameter"));
        }
        if !extent.is_well_formed() || extent.volume() <= 0.0 {
            return Err(ArborError::format(FMT, "degenerate extent"));
        }
        Ok(DensityGrid {
            resolution,
            extent,
            params,
        })
    }
}
