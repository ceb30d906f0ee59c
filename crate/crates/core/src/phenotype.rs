//! Forestry traits of a grown tree: height, DBH, crown radius and the area
//! of the shadow cast on the ground plane `z = 0`.
//!
//! Shadows are rasterized on a grid of square cells aligned to the world
//! origin. A cell is covered when its center lies in the parallel projection,
//! along the sun direction, of some branch frustum or leaf disk. The
//! membership tests are exact: a frustum projects to the convex hull of its
//! two end ellipses, which is the union of the ellipses interpolated between
//! them, and the test reduces to maximizing a quadratic over `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::geom::Vec3;
use crate::growth::{Leaf, TreeSkeleton};

pub const DEFAULT_BREAST_HEIGHT: f64 = 1.37;

/// Highest node above the root.
pub fn tree_height(skel: &TreeSkeleton) -> Result<f64> {
    let root = skel
        .root()
        .ok_or_else(|| ArborError::invalid("height of an empty skeleton"))?;
    let z0 = skel.nodes[root].position.z;
    Ok(skel.nodes.iter().map(|n| n.position.z - z0).fold(0.0, f64::max))
}

/// Trunk path from the root. Past the first branching node it continues
/// through the thickest child (lowest index on ties).
pub fn trunk_path(skel: &TreeSkeleton) -> Result<Vec<usize>> {
    let root = skel.root().ok_or_else(|| ArborError::invalid("empty skeleton"))?;
    skel.validate()?;
    let children = skel.children();
    let mut path = vec![root];
    let mut v = root;
    while !children[v].is_empty() {
        let mut next = children[v][0];
        for &c in &children[v][1..] {
            if skel.nodes[c].radius > skel.nodes[next].radius {
                next = c;
            }
        }
        path.push(next);
        v = next;
    }
    Ok(path)
}

/// Diameter in centimeters at `breast_height` above the root, linearly
/// interpolated along the trunk segment that crosses it.
pub fn dbh(skel: &TreeSkeleton, breast_height: f64) -> Result<f64> {
    if !(breast_height >= 0.0) || !breast_height.is_finite() {
        return Err(ArborError::invalid("breast height must be non-negative"));
    }
    let path = trunk_path(skel)?;
    let z = skel.nodes[path[0]].position.z + breast_height;
    for w in path.windows(2) {
        let (a, b) = (&skel.nodes[w[0]], &skel.nodes[w[1]]);
        let (za, zb) = (a.position.z, b.position.z);
        if za.min(zb) <= z && z <= za.max(zb) {
            let t = if zb == za { 0.0 } else { (z - za) / (zb - za) };
            let r = a.radius + t * (b.radius - a.radius);
            return Ok(200.0 * r);
        }
    }
    if path.len() == 1 && breast_height == 0.0 {
        return Ok(200.0 * skel.nodes[path[0]].radius);
    }
    Err(ArborError::UndefinedTrait(format!(
        "trunk does not reach breast height {breast_height} m"
    )))
}

/// Largest horizontal distance from the vertical axis through the root to
/// any node or leaf center.
pub fn crown_radius(skel: &TreeSkeleton, leaves: &[Leaf]) -> Result<f64> {
    let root = skel
        .root()
        .ok_or_else(|| ArborError::invalid("crown radius of an empty skeleton"))?;
    let c = skel.nodes[root].position;
    let horiz = |p: Vec3| ((p.x - c.x).powi(2) + (p.y - c.y).powi(2)).sqrt();
    let nodes = skel.nodes.iter().map(|n| horiz(n.position));
    let leaves = leaves.iter().map(|l| horiz(l.position));
    Ok(nodes.chain(leaves).fold(0.0, f64::max))
}

/// Primitive projected into the plane perpendicular to the sun.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    origin: Vec3,
    /// Unit vector along the projected axis (the ellipses' minor axis).
    s: Vec3,
    /// Unit vector along the major axis.
    m: Vec3,
    len: f64,
    k: f64,
    r0: f64,
    r1: f64,
}

impl Footprint {
    /// Whether the plane point `q` lies in the union over `t` of ellipses
    /// centered at `origin + t·len·s` with semi-axes `r(t)` along `m` and
    /// `k·r(t)` along `s`.
    fn contains(&self, q: Vec3) -> bool {
        let w = q - self.origin;
        let (x, y) = (w.dot(self.s), w.dot(self.m));
        let dr = self.r1 - self.r0;
        if self.k < 1e-12 {
            // edge-on: the ellipses collapse to segments along m
            if self.len <= 0.0 {
                return false;
            }
            let t = x / self.len;
            return (0.0..=1.0).contains(&t) && y.abs() <= self.r0 + t * dr;
        }
        // h(t) = k²r(t)² − k²y² − (x − t·len)², need max over [0,1] ≥ 0
        let k2 = self.k * self.k;
        let a = k2 * dr * dr - self.len * self.len;
        let b = 2.0 * k2 * self.r0 * dr + 2.0 * x * self.len;
        let c = k2 * (self.r0 * self.r0 - y * y) - x * x;
        let h = |t: f64| (a * t + b) * t + c;
        let mut best = h(0.0).max(h(1.0));
        if a < 0.0 {
            let t = -b / (2.0 * a);
            if (0.0..=1.0).contains(&t) {
                best = best.max(h(t));
            }
        }
        best >= 0.0
    }
}

fn project(p: Vec3, d: Vec3) -> Vec3 {
    p - d * p.dot(d)
}

fn frustum_footprint(a: Vec3, b: Vec3, ra: f64, rb: f64, d: Vec3) -> Footprint {
    let axis = (b - a).try_normalize().unwrap_or(d);
    let (pa, pb) = (project(a, d), project(b, d));
    let len = pa.distance(pb);
    let s = (pb - pa).try_normalize().unwrap_or_else(|| d.orthonormal_basis().0);
    Footprint {
        origin: pa,
        s,
        m: d.cross(s),
        len,
        k: axis.dot(d).abs(),
        r0: ra,
        r1: rb,
    }
}

fn leaf_footprint(l: &Leaf, d: Vec3) -> Footprint {
    let s = project(l.normal, d)
        .try_normalize()
        .unwrap_or_else(|| d.orthonormal_basis().0);
    Footprint {
        origin: project(l.position, d),
        s,
        m: d.cross(s),
        len: 0.0,
        k: l.normal.dot(d).abs(),
        r0: l.radius,
        r1: l.radius,
    }
}

/// Covered cells of the ground raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowRaster {
    pub cell: f64,
    /// Integer coordinates of the lower-left cell.
    pub origin: (i64, i64),
    pub width: usize,
    pub height: usize,
    pub covered: Vec<bool>,
}

impl ShadowRaster {
    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    pub fn area(&self) -> f64 {
        self.covered_count() as f64 * self.cell * self.cell
    }

    /// Shaded cells black on white, top row = largest `y`.
    pub fn write_pgm(&self, path: &std::path::Path) -> Result<()> {
        let (w, h) = (self.width.max(1), self.height.max(1));
        let mut data = vec![255u8; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.covered[y * self.width + x] {
                    data[(h - 1 - y) * w + x] = 0;
                }
            }
        }
        crate::imaging::write_pgm(path, w, h, &data)
    }
}

fn check_sun(sun_dir: Vec3) -> Result<Vec3> {
    let d = sun_dir
        .try_normalize()
        .filter(|d| d.is_finite())
        .ok_or_else(|| ArborError::invalid("sun direction must be a non-zero vector"))?;
    if !(d.z < 0.0) {
        return Err(ArborError::invalid(
            "sun direction must point downward (sun above the horizon)",
        ));
    }
    Ok(d)
}

/// Rasterized shadow of branches (and leaves, if any) along `sun_dir`, the
/// direction light travels.
pub fn shadow_raster(skel: &TreeSkeleton, leaves: &[Leaf], sun_dir: Vec3, ground_res: f64) -> Result<ShadowRaster> {
    let d = check_sun(sun_dir)?;
    if !(ground_res > 0.0) || !ground_res.is_finite() {
        return Err(ArborError::invalid("ground resolution must be positive"));
    }
    // ground point hit by the sun ray through p
    let ground = |p: Vec3| p - d * (p.z / d.z);

    let mut prims: Vec<(Footprint, [f64; 4])> = Vec::new();
    let mut push = |fp: Footprint, pts: &[(Vec3, f64)]| {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for &(p, r) in pts {
            for corner in 0..8 {
                let o = Vec3::new(
                    if corner & 1 == 0 { -r } else { r },
                    if corner & 2 == 0 { -r } else { r },
                    if corner & 4 == 0 { -r } else { r },
                );
                let g = ground(p + o);
                bb = [bb[0].min(g.x), bb[1].min(g.y), bb[2].max(g.x), bb[3].max(g.y)];
            }
        }
        prims.push((fp, bb));
    };
    for (p, c) in skel.edges() {
        let (a, b) = (&skel.nodes[p], &skel.nodes[c]);
        let fp = frustum_footprint(a.position, b.position, a.radius, b.radius, d);
        push(fp, &[(a.position, a.radius), (b.position, b.radius)]);
    }
    for l in leaves {
        push(leaf_footprint(l, d), &[(l.position, l.radius)]);
    }

    if prims.is_empty() {
        return Ok(ShadowRaster {
            cell: ground_res,
            origin: (0, 0),
            width: 0,
            height: 0,
            covered: Vec::new(),
        });
    }
    let cell_of = |v: f64| (v / ground_res).floor() as i64;
    let (mut i0, mut j0, mut i1, mut j1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for (_, bb) in &prims {
        i0 = i0.min(cell_of(bb[0]));
        j0 = j0.min(cell_of(bb[1]));
        i1 = i1.max(cell_of(bb[2]));
        j1 = j1.max(cell_of(bb[3]));
    }
    let (w, h) = ((i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize);
    let mut covered = vec![false; w * h];
    for (fp, bb) in &prims {
        for j in cell_of(bb[1])..=cell_of(bb[3]) {
            for i in cell_of(bb[0])..=cell_of(bb[2]) {
                let idx = (j - j0) as usize * w + (i - i0) as usize;
                if covered[idx] {
                    continue;
                }
                let g = Vec3::new((i as f64 + 0.5) * ground_res, (j as f64 + 0.5) * ground_res, 0.0);
                if fp.contains(project(g, d)) {
                    covered[idx] = true;
                }
            }
        }
    }
    Ok(ShadowRaster {
        cell: ground_res,
        origin: (i0, j0),
        width: w,
        height: h,
        covered,
    })
}

pub fn shadow_area(skel: &TreeSkeleton, leaves: &[Leaf], sun_dir: Vec3, ground_res: f64) -> Result<f64> {
    Ok(shadow_raster(skel, leaves, sun_dir, ground_res)?.area())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeOptions {
    pub breast_height: f64,
    pub sun_direction: Vec3,
    pub ground_res: f64,
}

impl Default for PhenotypeOptions {
    fn default() -> Self {
        PhenotypeOptions {
            breast_height: DEFAULT_BREAST_HEIGHT,
            sun_direction: Vec3::new(0.3, 0.2, -1.0).normalize(),
            ground_res: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeReport {
    /// Meters.
    pub height: f64,
    /// Centimeters; `None` when the trunk does not reach breast height.
    pub dbh: Option<f64>,
    pub breast_height: f64,
    pub crown_radius: f64,
    /// Square meters.
    pub shadow_area_leaf_on: f64,
    pub shadow_area_leaf_off: f64,
    pub sun_direction: Vec3,
    pub ground_res: f64,
}

pub fn measure(skel: &TreeSkeleton, leaves: &[Leaf], opts: &PhenotypeOptions) -> Result<PhenotypeReport> {
    let sun = check_sun(opts.sun_direction)?;
    let dbh = match dbh(skel, opts.breast_height) {
        Ok(v) => Some(v),
        Err(ArborError::UndefinedTrait(msg)) => {
            log::warn!("{msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let off = shadow_area(skel, &[], sun, opts.ground_res)?;
    let on = if leaves.is_empty() {
        off
    } else {
        shadow_area(skel, leaves, sun, opts.ground_res)?
    };
    Ok(PhenotypeReport {
        height: tree_height(skel)?,
        dbh,
        breast_height: opts.breast_height,
        crown_radius: crown_radius(skel, leaves)?,
        shadow_area_leaf_on: on,
        shadow_area_leaf_off: off,
        sun_direction: sun,
        ground_res: opts.ground_res,
    })
}
