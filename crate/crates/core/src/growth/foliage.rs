use rand::Rng as _;
use rand_distr::{Distribution, UnitSphere};

use super::skeleton::TreeSkeleton;
use crate::error::{ArborError, Result};
use crate::geom::Vec3;
use crate::rng;

/// A flat leaf disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    pub position: Vec3,
    /// Unit normal, always with `z >= 0`.
    pub normal: Vec3,
    pub radius: f64,
}

/// Segments eligible for foliage: edges whose child radius is below twice
/// the tip radius. Returned as `(parent, child)` pairs.
pub fn foliage_segments(skel: &TreeSkeleton, tip_radius: f64) -> Vec<(usize, usize)> {
    skel.edges()
        .filter(|&(_, c)| skel.nodes[c].radius < 2.0 * tip_radius)
        .collect()
}

/// Places `round(leaf_density × eligible length)` leaves. Each leaf picks a
/// segment with probability proportional to its length, a uniform point on
/// it, and an offset of at most `leaf_radius` perpendicular to it. The leaf
/// disk radius is `leaf_radius`.
pub fn attach_foliage(
    skel: &TreeSkeleton,
    tip_radius: f64,
    leaf_density: f64,
    leaf_radius: f64,
    seed: u64,
) -> Result<Vec<Leaf>> {
    if !(leaf_density >= 0.0) || !leaf_density.is_finite() {
        return Err(ArborError::invalid("leaf density must be a non-negative number"));
    }
    if !(leaf_radius >= 0.0) || !leaf_radius.is_finite() {
        return Err(ArborError::invalid("leaf radius must be a non-negative number"));
    }
    let segs = foliage_segments(skel, tip_radius);
    let mut cumulative = Vec::with_capacity(segs.len());
    let mut total = 0.0;
    for &(a, b) in &segs {
        total += skel.nodes[a].position.distance(skel.nodes[b].position);
        cumulative.push(total);
    }
    let count = (leaf_density * total).round() as usize;
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut r = rng::substream(seed, "foliage");
    let mut leaves = Vec::with_capacity(count);
    for _ in 0..count {
        let pick = r.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= pick).min(segs.len() - 1);
        let (a, b) = (skel.nodes[segs[k].0].position, skel.nodes[segs[k].1].position);
        let axis = (b - a).try_normalize().unwrap_or(Vec3::Z);
        let (u, v) = axis.orthonormal_basis();
        let phi = r.random::<f64>() * std::f64::consts::TAU;
        let off = leaf_radius * r.random::<f64>();
        let t: f64 = r.random();
        let position = a + (b - a) * t + (u * phi.cos() + v * phi.sin()) * off;
        let n: [f64; 3] = UnitSphere.sample(&mut r);
        let mut normal = Vec3::from(n);
        if normal.z < 0.0 {
            normal = -normal;
        }
        leaves.push(Leaf {
            position,
            normal,
            radius: leaf_radius,
        });
    }
    Ok(leaves)
}

pub fn write_leaves_ply(path: &std::path::Path, leaves: &[Leaf]) -> Result<()> {
    let p: Vec<Vec3> = leaves.iter().map(|l| l.position).collect();
    let n: Vec<Vec3> = leaves.iter().map(|l| l.normal).collect();
    crate::ply::write_points(path, &p, Some(&n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_segment_distance;

    fn twig() -> TreeSkeleton {
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)]);
        s.assign_radii(0.01, 2.0).unwrap();
        s
    }

    #[test]
    fn zero_density_gives_no_leaves() {
        assert!(attach_foliage(&twig(), 0.01, 0.0, 0.05, 1).unwrap().is_empty());
    }

    #[test]
    fn one_meter_segment_density_ten() {
        let leaves = attach_foliage(&twig(), 0.01, 10.0, 0.05, 1).unwrap();
        assert_eq!(leaves.len(), 10);
        for l in &leaves {
            assert!(point_segment_distance(l.position, Vec3::ZERO, Vec3::Z) <= 0.05 + 1e-12);
            assert!((l.normal.norm() - 1.0).abs() < 1e-12 && l.normal.z >= 0.0);
        }
        assert_eq!(leaves, attach_foliage(&twig(), 0.01, 10.0, 0.05, 1).unwrap());
    }

    #[test]
    fn thick_segments_are_skipped() {
        // fork: trunk radius sqrt(2)·tip < 2·tip is still eligible; make a thicker trunk
        let mut s = TreeSkeleton::with_root(Vec3::ZERO);
        let top = s.push(0, Vec3::Z, 0);
        for k in 0..5 {
            let d = Vec3::new(1.0, 0.0, 0.0).rotate_z(72.0 * k as f64);
            s.push(top, Vec3::Z + d * 0.5, 1);
        }
        s.assign_radii(0.01, 2.0).unwrap();
        let segs = foliage_segments(&s, 0.01);
        assert_eq!(segs.len(), 5);
        let leaves = attach_foliage(&s, 0.01, 20.0, 0.02, 3).unwrap();
        assert_eq!(leaves.len(), 50);
        for l in &leaves {
            let near = segs.iter().any(|&(a, b)| {
                point_segment_distance(l.position, s.nodes[a].position, s.nodes[b].position) <= 0.02 + 1e-12
            });
            assert!(near);
        }
    }
}
