//! Chamfer distance between point clouds, surface sampling of skeleton
//! geometry, and geometric branching attributes.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};
use crate::growth::TreeSkeleton;
use crate::rng;
use crate::spatial::KdTree;

/// Stamped into every chamfer result.
pub const CHAMFER_CONVENTION: &str = "mean squared nearest-neighbour distance, summed over both directions";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Coordinates as given.
    Raw,
    /// Each cloud centered on its bounding-box center and scaled to unit
    /// bounding-box diagonal.
    #[default]
    UnitDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamferResult {
    pub value: f64,
    pub a_to_b: f64,
    pub b_to_a: f64,
    pub convention: String,
    pub normalization: Normalization,
}

pub fn normalize_cloud(points: &[Vec3]) -> Result<Vec<Vec3>> {
    let bb = Aabb::from_points(points.iter().copied()).ok_or_else(|| ArborError::invalid("empty point cloud"))?;
    let c = bb.center();
    let diag = bb.size().norm();
    let scale = if diag > 0.0 { 1.0 / diag } else { 1.0 };
    Ok(points.iter().map(|&p| (p - c) * scale).collect())
}

fn check_cloud(points: &[Vec3], name: &str) -> Result<()> {
    if points.is_empty() {
        return Err(ArborError::invalid(format!("point cloud {name} is empty")));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(ArborError::invalid(format!(
            "point cloud {name} has non-finite coordinates"
        )));
    }
    Ok(())
}

fn directed(from: &[Vec3], to: &KdTree) -> f64 {
    let d: Vec<f64> = from
        .par_iter()
        .map(|&p| to.nearest(p).map_or(0.0, |(_, d2)| d2))
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

pub fn chamfer(a: &[Vec3], b: &[Vec3], normalization: Normalization) -> Result<ChamferResult> {
    check_cloud(a, "a")?;
    check_cloud(b, "b")?;
    let (a, b) = match normalization {
        Normalization::Raw => (a.to_vec(), b.to_vec()),
        Normalization::UnitDiagonal => (normalize_cloud(a)?, normalize_cloud(b)?),
    };
    let (ta, tb) = (KdTree::build(&a), KdTree::build(&b));
    let a_to_b = directed(&a, &tb);
    let b_to_a = directed(&b, &ta);
    // sum in a fixed order so chamfer(a, b) == chamfer(b, a) bit for bit
    let value = a_to_b.min(b_to_a) + a_to_b.max(b_to_a);
    Ok(ChamferResult {
        value,
        a_to_b,
        b_to_a,
        convention: CHAMFER_CONVENTION.to_string(),
        normalization,
    })
}

/// `n` points distributed uniformly by area over the lateral surfaces of the
/// skeleton's truncated cones. A skeleton whose cones all have zero area is
/// sampled along its segments by length instead, and a single node yields
/// `n` copies of itself.
pub fn sample_points(skel: &TreeSkeleton, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(ArborError::invalid("need at least one sample"));
    }
    if skel.is_empty() {
        return Err(ArborError::invalid("cannot sample an empty skeleton"));
    }
    let edges: Vec<(usize, usize)> = skel.edges().collect();
    if edges.is_empty() {
        return Ok(vec![skel.nodes[0].position; n]);
    }
    let geom: Vec<(Vec3, Vec3, f64, f64)> = edges
        .iter()
        .map(|&(p, c)| {
            let (a, b) = (&skel.nodes[p], &skel.nodes[c]);
            (a.position, b.position, a.radius, b.radius)
        })
        .collect();
    let area = |&(a, b, ra, rb): &(Vec3, Vec3, f64, f64)| {
        let h = a.distance(b);
        std::f64::consts::PI * (ra + rb) * (h * h + (ra - rb) * (ra - rb)).sqrt()
    };
    let mut weights: Vec<f64> = geom.iter().map(area).collect();
    let by_area = weights.iter().sum::<f64>() > 0.0;
    if !by_area {
        weights = geom.iter().map(|g| g.0.distance(g.1)).collect();
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for w in &weights {
        total += w;
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Ok(vec![skel.nodes[0].position; n]);
    }

    let mut r = rng::substream(seed, "surface-samples");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = r.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= pick).min(geom.len() - 1);
        let (a, b, ra, rb) = geom[k];
        let u: f64 = r.random();
        let phi = r.random::<f64>() * std::f64::consts::TAU;
        if !by_area {
            out.push(a + (b - a) * u);
            continue;
        }
        // circumference grows linearly along the cone, so invert
        // F(t) = (ra t + (rb - ra) t²/2) / ((ra + rb)/2)
        let dr = rb - ra;
        let target = u * 0.5 * (ra + rb);
        let t = if dr.abs() < 1e-12 * (ra + rb) {
            u
        } else {
            ((-ra + (ra * ra + 2.0 * dr * target).sqrt()) / dr).clamp(0.0, 1.0)
        };
        let axis = (b - a).try_normalize().unwrap_or(Vec3::Z);
        let (e1, e2) = axis.orthonormal_basis();
        let rad = ra + dr * t;
        out.push(a + (b - a) * t + (e1 * phi.cos() + e2 * phi.sin()) * rad);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Node indices from the start node to the end node.
    pub nodes: Vec<usize>,
    pub path_length: f64,
    pub chord_length: f64,
    pub straightness: f64,
    pub tortuosity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    /// Equal-width bins; values outside `[min, max]` go to the end bins.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
}

impl Summary {
    /// Population statistics over the values in sorted order, so the result
    /// does not depend on input order.
    pub fn of(values: &[f64], min: f64, max: f64, bins: usize) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = if n == 0 { 0.0 } else { v.iter().sum::<f64>() / n as f64 };
        let std = if n == 0 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt()
        };
        let mut counts = vec![0usize; bins];
        for &x in &v {
            let k = ((x - min) / (max - min) * bins as f64).floor();
            counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
        }
        Summary {
            count: n,
            mean,
            std,
            histogram: Histogram { min, max, counts },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchAttributes {
    pub branches: Vec<Branch>,
    /// Angle between the incoming internode and each outgoing internode at
    /// nodes with two or more children, degrees.
    pub junction_angles: Vec<f64>,
    /// The same angle at interior nodes with a single child.
    pub bend_angles: Vec<f64>,
    /// Path length of each branch over that of the branch it forks from.
    pub segment_ratios: Vec<f64>,
    pub straightness: Summary,
    pub tortuosity: Summary,
    pub junction_angle: Summary,
    pub bend_angle: Summary,
    pub segment_ratio: Summary,
}

impl BranchAttributes {
    /// Means and standard deviations of every attribute, in a fixed order.
    pub fn feature_vector(&self) -> Vec<f64> {
        [
            &self.straightness,
            &self.tortuosity,
            &self.junction_angle,
            &self.bend_angle,
            &self.segment_ratio,
        ]
        .iter()
        .flat_map(|s| [s.mean, s.std])
        .collect()
    }
}

/// Splits the skeleton into branches (maximal single-child chains between
/// the root, junctions and tips) and measures them.
pub fn branch_attributes(skel: &TreeSkeleton) -> Result<BranchAttributes> {
    if skel.is_empty() {
        return Err(ArborError::invalid("branch attributes of an empty skeleton"));
    }
    let order = skel.topological_order()?;
    let children = skel.children();
    let pos = |i: usize| skel.nodes[i].position;

    let mut branches = Vec::new();
    for &start in &order {
        let is_break = skel.nodes[start].parent.is_none() || children[start].len() >= 2;
        if !is_break {
            continue;
        }
        for &first in &children[start] {
            let mut nodes = vec![start, first];
            let mut v = first;
            while children[v].len() == 1 {
                v = children[v][0];
                nodes.push(v);
            }
            let path_length: f64 = nodes.windows(2).map(|w| pos(w[0]).distance(pos(w[1]))).sum();
            let chord_length = pos(start).distance(pos(v));
            if path_length <= 0.0 || chord_length <= 0.0 {
                continue;
            }
            branches.push(Branch {
                nodes,
                path_length,
                chord_length,
                straightness: (chord_length / path_length).min(1.0),
                tortuosity: (path_length / chord_length).max(1.0),
            });
        }
    }

    let mut ends_at = vec![None; skel.len()];
    for (k, b) in branches.iter().enumerate() {
        ends_at[*b.nodes.last().unwrap()] = Some(k);
    }
    let segment_ratios: Vec<f64> = branches
        .iter()
        .filter_map(|b| ends_at[b.nodes[0]].map(|k| b.path_length / branches[k].path_length))
        .collect();

    let mut junction_angles = Vec::new();
    let mut bend_angles = Vec::new();
    for &v in &order {
        let Some(p) = skel.nodes[v].parent else { continue };
        let incoming = pos(v) - pos(p);
        for &c in &children[v] {
            let out = pos(c) - pos(v);
            if incoming.norm() > 0.0 && out.norm() > 0.0 {
                let a = incoming.angle_deg(out);
                if children[v].len() >= 2 {
                    junction_angles.push(a);
                } else {
                    bend_angles.push(a);
                }
            }
        }
    }

    let straight: Vec<f64> = branches.iter().map(|b| b.straightness).collect();
    let tort: Vec<f64> = branches.iter().map(|b| b.tortuosity).collect();
    Ok(BranchAttributes {
        straightness: Summary::of(&straight, 0.0, 1.0, 10),
        tortuosity: Summary::of(&tort, 1.0, 3.0, 10),
        junction_angle: Summary::of(&junction_angles, 0.0, 180.0, 18),
        bend_angle: Summary::of(&bend_angles, 0.0, 180.0, 18),
        segment_ratio: Summary::of(&segment_ratios, 0.0, 2.0, 10),
        branches,
        junction_angles,
        bend_angles,
        segment_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_segment_distance;
    use proptest::prelude::*;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|_| {
                Vec3::new(
                    r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                    r.random_range(0.0..3.0),
                )
            })
            .collect()
    }

    #[test]
    fn identity_is_zero() {
        let a = random_cloud(200, 1);
        for mode in [Normalization::Raw, Normalization::UnitDiagonal] {
            assert_eq!(chamfer(&a, &a, mode).unwrap().value, 0.0);
        }
    }

    #[test]
    fn two_singletons() {
        let r = chamfer(&[Vec3::ZERO], &[Vec3::X], Normalization::Raw).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.convention, CHAMFER_CONVENTION);
    }

    #[test]
    fn brute_force_oracle() {
        let (a, b) = (random_cloud(60, 2), random_cloud(45, 3));
        let dir = |x: &[Vec3], y: &[Vec3]| {
            x.iter()
                .map(|p| y.iter().map(|q| p.distance_sq(*q)).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / x.len() as f64
        };
        let r = chamfer(&a, &b, Normalization::Raw).unwrap();
        assert!((r.value - (dir(&a, &b) + dir(&b, &a))).abs() < 1e-12);
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(chamfer(&[], &[Vec3::ZERO], Normalization::Raw).is_err());
    }

    #[test]
    fn normalization_removes_scale_and_offset() {
        let a = random_cloud(100, 4);
        let b = random_cloud(100, 5);
        let moved: Vec<Vec3> = b.iter().map(|&p| p * 3.0 + Vec3::new(5.0, -2.0, 1.0)).collect();
        let x = chamfer(&a, &b, Normalization::UnitDiagonal).unwrap().value;
        let y = chamfer(&a, &moved, Normalization::UnitDiagonal).unwrap().value;
        assert!((x - y).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_exactly(sa in 0u64..1000, sb in 0u64..1000, na in 1usize..80, nb in 1usize..80) {
            let (a, b) = (random_cloud(na, sa), random_cloud(nb, sb + 7919));
            for mode in [Normalization::Raw, Normalization::UnitDiagonal] {
                prop_assert_eq!(chamfer(&a, &b, mode).unwrap().value, chamfer(&b, &a, mode).unwrap().value);
            }
        }

        #[test]
        fn rigid_motion_invariant(seed in 0u64..1000, yaw in 0.0..360.0f64, pitch in 0.0..3.1f64) {
            let (a, b) = (random_cloud(50, seed), random_cloud(70, seed + 1));
            let t = Vec3::new(1.5, -0.5, 2.0);
            let (sp, cp) = pitch.sin_cos();
            let mv = |p: Vec3| {
                let p = Vec3::new(p.x, cp * p.y - sp * p.z, sp * p.y + cp * p.z);
                p.rotate_z(yaw) + t
            };
            let a2: Vec<Vec3> = a.iter().map(|&p| mv(p)).collect();
            let b2: Vec<Vec3> = b.iter().map(|&p| mv(p)).collect();
            let x = chamfer(&a, &b, Normalization::Raw).unwrap().value;
            let y = chamfer(&a2, &b2, Normalization::Raw).unwrap().value;
            prop_assert!((x - y).abs() <= 1e-9 * x.abs());
        }
    }

    fn cylinder(r: f64, h: f64) -> TreeSkeleton {
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::new(0.0, 0.0, h)]);
        for n in &mut s.nodes {
            n.radius = r;
        }
        s
    }

    #[test]
    fn sample_count_and_determinism() {
        let s = cylinder(0.1, 1.0);
        let a = sample_points(&s, 123, 9).unwrap();
        assert_eq!(a.len(), 123);
        assert_eq!(a, sample_points(&s, 123, 9).unwrap());
        assert!(sample_points(&s, 0, 9).is_err());
    }

    #[test]
    fn cylinder_height_histogram_is_uniform() {
        let pts = sample_points(&cylinder(0.1, 2.0), 20_000, 11).unwrap();
        let mut bins = [0usize; 10];
        for p in &pts {
            assert!(((p.x * p.x + p.y * p.y).sqrt() - 0.1).abs() < 1e-12);
            bins[((p.z / 2.0 * 10.0) as usize).min(9)] += 1;
        }
        let e = pts.len() as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // χ²(9) critical value at p = 0.01
        assert!(chi2 < 21.666, "{chi2}");
    }

    #[test]
    fn cone_samples_follow_circumference() {
        // radius 0.2 at the bottom, 0 at the top: density along z ∝ (1 - z)
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z]);
        s.nodes[0].radius = 0.2;
        let pts = sample_points(&s, 20_000, 3).unwrap();
        let lower = pts.iter().filter(|p| p.z < 0.5).count() as f64 / pts.len() as f64;
        assert!((lower - 0.75).abs() < 0.015, "{lower}");
    }

    #[test]
    fn samples_lie_in_the_radius_tube() {
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.5, 0.3, 1.4)]);
        s.push(1, Vec3::new(-0.4, 0.0, 1.6), 0);
        s.assign_radii(0.03, 2.0).unwrap();
        let r = s.max_radius();
        for p in sample_points(&s, 500, 1).unwrap() {
            let d = s
                .edges()
                .map(|(a, b)| point_segment_distance(p, s.nodes[a].position, s.nodes[b].position))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= r + 1e-12);
        }
    }

    #[test]
    fn straight_chain_attributes() {
        let pts: Vec<Vec3> = (0..6).map(|i| Vec3::new(0.0, 0.0, i as f64 * 0.3)).collect();
        let a = branch_attributes(&TreeSkeleton::chain(&pts)).unwrap();
        assert_eq!(a.branches.len(), 1);
        assert!((a.branches[0].straightness - 1.0).abs() < 1e-12);
        assert!((a.branches[0].tortuosity - 1.0).abs() < 1e-12);
        assert!(a.junction_angles.is_empty());
        assert!(a.bend_angles.iter().all(|&x| x.abs() < 1e-6));
        assert!(a.segment_ratios.is_empty());
    }

    #[test]
    fn right_angle_branch() {
        let s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z, Vec3::new(1.0, 0.0, 1.0)]);
        let a = branch_attributes(&s).unwrap();
        assert!((a.branches[0].straightness - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.bend_angles.len(), 1);
        assert!((a.bend_angles[0] - 90.0).abs() < 1e-9);
        let straight =
            branch_attributes(&TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z, Vec3::new(0.0, 0.0, 2.0)])).unwrap();
        assert!(straight.straightness.mean > a.straightness.mean);
    }

    #[test]
    fn junction_splits_branches() {
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z]);
        s.push(1, Vec3::new(1.0, 0.0, 1.0), 1);
        s.push(1, Vec3::new(0.0, 0.0, 2.0), 1);
        let a = branch_attributes(&s).unwrap();
        assert_eq!(a.branches.len(), 3);
        let mut j = a.junction_angles.clone();
        j.sort_by(f64::total_cmp);
        assert!(j[0].abs() < 1e-9 && (j[1] - 90.0).abs() < 1e-9);
    }

    #[test]
    fn segment_ratio_compares_child_and_parent_branches() {
        // trunk of length 1 forking into branches of length 2 and 0.5
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z, Vec3::new(1.0, 0.0, 1.0), Vec3::new(2.0, 0.0, 1.0)]);
        s.push(1, Vec3::new(0.0, 0.0, 1.5), 1);
        let a = branch_attributes(&s).unwrap();
        let mut r = a.segment_ratios.clone();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![0.5, 2.0]);
        assert_eq!(a.segment_ratio.mean, 1.25);
    }

    #[test]
    fn single_node_gives_empty_attributes() {
        let a = branch_attributes(&TreeSkeleton::with_root(Vec3::ZERO)).unwrap();
        assert!(a.branches.is_empty() && a.junction_angles.is_empty());
        assert_eq!(a.straightness.count, 0);
    }

    #[test]
    fn permutation_invariance() {
        let mut s = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z, Vec3::new(0.2, 0.0, 1.5)]);
        s.push(1, Vec3::new(-0.5, 0.1, 1.4), 1);
        s.push(3, Vec3::new(-0.7, 0.4, 1.9), 2);
        s.push(2, Vec3::new(0.3, -0.2, 2.2), 2);
        // reverse all indices except keep the structure
        let n = s.len();
        let map = |i: usize| n - 1 - i;
        let mut p = TreeSkeleton { nodes: s.nodes.clone() };
        for (i, node) in s.nodes.iter().enumerate() {
            p.nodes[map(i)] = crate::growth::Node {
                parent: node.parent.map(map),
                ..*node
            };
        }
        let (a, b) = (branch_attributes(&s).unwrap(), branch_attributes(&p).unwrap());
        assert_eq!(a.feature_vector(), b.feature_vector());
        assert_eq!(a.straightness, b.straightness);
        assert_eq!(a.junction_angle, b.junction_angle);
    }
}
