//! Occupancy extraction from an optimized density grid and attraction-marker
//! sampling inside it.
//!
//! # Occupancy file format
//!
//! Little-endian binary:
//!
//! | offset | type      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | `[u8; 8]` | magic `ARBOROCC`                        |
//! | 8      | `u32`     | version (1)                             |
//! | 12     | `u32 × 3` | resolution `nx ny nz`                   |
//! | 24     | `f64 × 6` | extent `min.xyz max.xyz` (meters)       |
//! | 72     | `f64`     | threshold used for extraction           |
//! | 80     | `u32`     | number of runs `R`                      |
//! | 84     | `u32 × R` | run lengths                             |
//!
//! Runs cover voxels in grid order (`x` fastest, then `y`, then `z`) and
//! alternate outside/inside, starting with outside. A leading run may be 0.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};
use crate::render::DensityGrid;
use crate::rng;

pub const OCCUPANCY_MAGIC: &[u8; 8] = b"ARBOROCC";
pub const OCCUPANCY_VERSION: u32 = 1;
pub const DEFAULT_MARKER_DENSITY: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Empty,
    Full,
    /// No inside voxel sits above the trunk anchor, so a trunk grown from the
    /// ground cannot reach the crown.
    Unanchored,
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Degeneracy::Empty => "envelope is empty",
            Degeneracy::Full => "envelope fills the whole grid",
            Degeneracy::Unanchored => "envelope is not reachable from the trunk anchor",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyVolume {
    pub resolution: [usize; 3],
    pub extent: Aabb,
    pub inside: Vec<bool>,
    pub tau: f64,
}

impl OccupancyVolume {
    pub fn new(resolution: [usize; 3], extent: Aabb, inside: Vec<bool>, tau: f64) -> Result<Self> {
        let n = resolution.iter().product::<usize>();
        if n == 0 || inside.len() != n {
            return Err(ArborError::invalid("occupancy size does not match resolution"));
        }
        if !extent.is_well_formed() || extent.volume() <= 0.0 {
            return Err(ArborError::invalid("occupancy extent must have positive volume"));
        }
        Ok(OccupancyVolume {
            resolution,
            extent,
            inside,
            tau,
        })
    }

    /// Occupancy from a predicate evaluated at voxel centers.
    pub fn from_fn(resolution: [usize; 3], extent: Aabb, mut f: impl FnMut(Vec3) -> bool) -> Result<Self> {
        let probe = DensityGrid::new(resolution, extent, 1.0, [0.5; 3])?;
        let inside = (0..probe.voxel_count()).map(|v| f(probe.voxel_center(v))).collect();
        OccupancyVolume::new(resolution, extent, inside, 0.0)
    }

    pub fn voxel_count(&self) -> usize {
        self.inside.len()
    }

    pub fn voxel_size(&self) -> Vec3 {
        let s = self.extent.size();
        let [nx, ny, nz] = self.resolution;
        Vec3::new(s.x / nx as f64, s.y / ny as f64, s.z / nz as f64)
    }

    pub fn voxel_volume(&self) -> f64 {
        let s = self.voxel_size();
        s.x * s.y * s.z
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution[0] * (y + self.resolution[1] * z)
    }

    pub fn coords(&self, v: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [v % nx, (v / nx) % ny, v / (nx * ny)]
    }

    pub fn voxel_bounds(&self, v: usize) -> Aabb {
        let s = self.voxel_size();
        let [x, y, z] = self.coords(v);
        let min = self.extent.min + Vec3::new(x as f64 * s.x, y as f64 * s.y, z as f64 * s.z);
        Aabb::new(min, min + s)
    }

    /// Voxel containing `p`, or `None` outside the extent. Points on the
    /// upper faces belong to the last voxel.
    pub fn voxel_of(&self, p: Vec3) -> Option<usize> {
        if !self.extent.contains(p) {
            return None;
        }
        let rel = p - self.extent.min;
        let s = self.voxel_size();
        let mut c = [0usize; 3];
        for axis in 0..3 {
            let n = self.resolution[axis];
            c[axis] = ((rel[axis] / s[axis]).floor() as usize).min(n - 1);
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        self.voxel_of(p).is_some_and(|v| self.inside[v])
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn inside_fraction(&self) -> f64 {
        self.inside_count() as f64 / self.voxel_count() as f64
    }

    pub fn inside_volume(&self) -> f64 {
        self.inside_count() as f64 * self.voxel_volume()
    }

    /// Bounding box of the inside voxels.
    pub fn inside_bounds(&self) -> Option<Aabb> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (v, _) in self.inside.iter().enumerate().filter(|(_, &b)| b) {
            any = true;
            let c = self.coords(v);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        if !any {
            return None;
        }
        let a = self.voxel_bounds(self.index(lo[0], lo[1], lo[2]));
        let b = self.voxel_bounds(self.index(hi[0], hi[1], hi[2]));
        Some(Aabb::new(a.min, b.max))
    }

    /// Mean of inside voxel centers.
    pub fn centroid(&self) -> Option<Vec3> {
        let mut sum = Vec3::ZERO;
        let mut n = 0usize;
        for (v, _) in self.inside.iter().enumerate().filter(|(_, &b)| b) {
            sum += self.voxel_bounds(v).center();
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Trunk anchor under the crown: the inside centroid's `x, y` on the
    /// bottom face of the extent.
    pub fn default_anchor(&self) -> Option<Vec3> {
        self.centroid().map(|c| Vec3::new(c.x, c.y, self.extent.min.z))
    }

    /// Whether the voxel column above `anchor` contains an inside voxel.
    pub fn is_anchored(&self, anchor: Vec3) -> bool {
        let probe = Vec3::new(anchor.x, anchor.y, self.extent.min.z);
        let Some(v) = self.voxel_of(probe) else {
            return false;
        };
        let [x, y, _] = self.coords(v);
        (0..self.resolution[2]).any(|z| self.inside[self.index(x, y, z)])
    }

    pub fn degeneracy(&self, anchor: Option<Vec3>) -> Option<Degeneracy> {
        let count = self.inside_count();
        if count == 0 {
            Some(Degeneracy::Empty)
        } else if count == self.voxel_count() {
            Some(Degeneracy::Full)
        } else {
            let anchor = anchor.or_else(|| self.default_anchor())?;
            (!self.is_anchored(anchor)).then_some(Degeneracy::Unanchored)
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut runs: Vec<u32> = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in &self.inside {
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);

        let mut buf = Vec::with_capacity(84 + 4 * runs.len());
        buf.extend_from_slice(OCCUPANCY_MAGIC);
        buf.extend_from_slice(&OCCUPANCY_VERSION.to_le_bytes());
        for r in self.resolution {
            buf.extend_from_slice(&(r as u32).to_le_bytes());
        }
        for c in self.extent.min.to_array().into_iter().chain(self.extent.max.to_array()) {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&self.tau.to_le_bytes());
        buf.extend_from_slice(&(runs.len() as u32).to_le_bytes());
        for r in runs {
            buf.extend_from_slice(&r.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "occupancy";
        if bytes.len() < 84 || &bytes[..8] != OCCUPANCY_MAGIC {
            return Err(ArborError::format(FMT, "missing magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(8) != OCCUPANCY_VERSION {
            return Err(ArborError::format(FMT, format!("unsupported version {}", u32_at(8))));
        }
        let resolution = [u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize];
        let extent = Aabb::new(
            Vec3::new(f64_at(24), f64_at(32), f64_at(40)),
            Vec3::new(f64_at(48), f64_at(56), f64_at(64)),
        );
        let tau = f64_at(72);
        let nruns = u32_at(80) as usize;
        if bytes.len() != 84 + 4 * nruns {
            return Err(ArborError::format(FMT, "run table size mismatch"));
        }
        let n: usize = resolution.iter().product();
        let mut inside = Vec::with_capacity(n);
        for i in 0..nruns {
            let len = u32_at(84 + 4 * i) as usize;
            if inside.len() + len > n {
                return Err(ArborError::format(FMT, "runs exceed voxel count"));
            }
            inside.extend(std::iter::repeat_n(i % 2 == 1, len));
        }
        if inside.len() != n {
            return Err(ArborError::format(FMT, "runs do not cover the grid"));
        }
        OccupancyVolume::new(resolution, extent, inside, tau).map_err(|e| ArborError::format(FMT, e.to_string()))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        crate::pipeline::write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// An extracted volume plus the degeneracy warning, if any.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub volume: OccupancyVolume,
    pub inside_fraction: f64,
    pub warning: Option<Degeneracy>,
}

/// Thresholds voxel densities: `inside = density >= tau`.
pub fn extract_occupancy(grid: &DensityGrid, tau: f64) -> Result<Extraction> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ArborError::invalid(format!("threshold must be positive, got {tau}")));
    }
    let inside: Vec<bool> = grid.densities().into_iter().map(|d| d >= tau).collect();
    let volume = OccupancyVolume::new(grid.resolution(), grid.extent(), inside, tau)?;
    let warning = volume.degeneracy(None);
    if let Some(w) = warning {
        log::warn!("{w} (tau = {tau})");
    }
    Ok(Extraction {
        inside_fraction: volume.inside_fraction(),
        volume,
        warning,
    })
}

/// Half the 99th-percentile (nearest rank) voxel density.
pub fn default_tau(grid: &DensityGrid) -> f64 {
    let mut d = grid.densities();
    d.sort_by(f64::total_cmp);
    let rank = ((0.99 * d.len() as f64).ceil() as usize).clamp(1, d.len());
    0.5 * d[rank - 1]
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkerSet {
    pub points: Vec<Vec3>,
    pub alive: Vec<bool>,
}

impl MarkerSet {
    /// All markers start alive.
    pub fn new(points: Vec<Vec3>) -> Self {
        let alive = vec![true; points.len()];
        MarkerSet { points, alive }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn dead_count(&self) -> usize {
        self.len() - self.alive_count()
    }

    pub fn alive_points(&self) -> Vec<Vec3> {
        self.points
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(&p, _)| p)
            .collect()
    }

    /// Scales positions about `origin`.
    pub fn scaled(&self, origin: Vec3, factor: f64) -> MarkerSet {
        MarkerSet {
            points: self.points.iter().map(|&p| origin + (p - origin) * factor).collect(),
            alive: self.alive.clone(),
        }
    }

    pub fn write_ply(&self, path: &std::path::Path) -> Result<()> {
        crate::ply::write_points(path, &self.points, None)
    }
}

/// Uniform rejection sampling over the inside voxels.
///
/// Draws `round(density × V_box)` uniform candidates in the bounding box of
/// the inside voxels and keeps those that land inside, so the expected count
/// is `density × inside_volume`.
pub fn sample_markers(vol: &OccupancyVolume, density: f64, seed: u64) -> Result<MarkerSet> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(ArborError::invalid(format!(
            "marker density must be positive, got {density}"
        )));
    }
    let Some(bounds) = vol.inside_bounds() else {
        return Ok(MarkerSet::default());
    };
    let trials = (density * bounds.volume()).round() as usize;
    let mut r = rng::substream(seed, "markers");
    let size = bounds.size();
    let mut points = Vec::new();
    for _ in 0..trials {
        let u: [f64; 3] = [r.random(), r.random(), r.random()];
        let p = bounds.min + Vec3::new(u[0] * size.x, u[1] * size.y, u[2] * size.z);
        if vol.contains_point(p) {
            points.push(p);
        }
    }
    Ok(MarkerSet::new(points))
}
