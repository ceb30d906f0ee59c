//! Space colonization.
//!
//! Every node is a potential bud. One step:
//!
//! 1. markers within `kill_distance` of any node die;
//! 2. each remaining alive marker picks the nearest node whose perception
//!    cone (radius `perception_radius`, half-angle `perception_angle` around
//!    the node's growth direction) contains it;
//! 3. each picked node grows one internode along
//!    `normalize(normalize(Σ u) + tropism)`, where `u` are unit vectors to
//!    its markers, turned back onto the branching cone if it leaves it;
//! 4. markers within `kill_distance` of the new nodes die.
//!
//! New nodes inside an obstacle are dropped, and markers inside an obstacle
//! never attract.

use serde::{Deserialize, Serialize};

use super::obstacle::{blocked, Obstacle};
use super::params::GenusParams;
use super::skeleton::TreeSkeleton;
use crate::envelope::MarkerSet;
use crate::error::{ArborError, Result};
use crate::geom::Vec3;
use crate::spatial::KdTree;

/// A new child closer than this fraction of an internode to an existing
/// sibling is a duplicate and is not added.
const DUPLICATE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub added: usize,
    /// Marker indices killed during the step, ascending.
    pub killed: Vec<usize>,
}

fn kill_near(markers: &mut MarkerSet, nodes: &[Vec3], radius: f64, killed: &mut Vec<usize>) {
    if nodes.is_empty() {
        return;
    }
    let tree = KdTree::build(nodes);
    let r2 = radius * radius;
    for i in 0..markers.len() {
        if markers.alive[i] && tree.nearest(markers.points[i]).is_some_and(|(_, d2)| d2 <= r2) {
            markers.alive[i] = false;
            killed.push(i);
        }
    }
}

/// Rotates `d` toward `axis` until the angle between them is at most
/// `max_deg`. Both inputs are unit vectors.
fn clamp_to_cone(d: Vec3, axis: Vec3, max_deg: f64) -> Vec3 {
    if d.angle_deg(axis) <= max_deg {
        return d;
    }
    let perp = (d - axis * d.dot(axis))
        .try_normalize()
        .unwrap_or_else(|| axis.orthonormal_basis().0);
    let a = max_deg.to_radians();
    (axis * a.cos() + perp * a.sin()).normalize()
}

/// One colonization step. New nodes are stamped with `step`.
pub fn colonize_step(
    skel: &mut TreeSkeleton,
    markers: &mut MarkerSet,
    params: &GenusParams,
    obstacles: &[Obstacle],
    step: usize,
) -> Result<StepReport> {
    params.validate()?;
    let mut report = StepReport::default();
    if skel.is_empty() {
        return Ok(report);
    }
    let positions = skel.positions();
    kill_near(markers, &positions, params.kill_distance, &mut report.killed);

    let tree = KdTree::build(&positions);
    let cos_cone = params.perception_angle.to_radians().cos();
    let dirs: Vec<Vec3> = (0..skel.len()).map(|i| skel.direction(i)).collect();
    let mut pull: Vec<Option<Vec3>> = vec![None; skel.len()];
    for (m, &q) in markers.points.iter().enumerate() {
        if !markers.alive[m] || blocked(obstacles, q) {
            continue;
        }
        // within_radius is index-sorted, so strict `<` keeps the lowest index on ties
        let mut best: Option<(usize, f64)> = None;
        for n in tree.within_radius(q, params.perception_radius) {
            let v = q - positions[n];
            let d = v.norm();
            if d == 0.0 || v.dot(dirs[n]) < cos_cone * d {
                continue;
            }
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((n, d));
            }
        }
        if let Some((n, d)) = best {
            let u = (q - positions[n]) / d;
            pull[n] = Some(pull[n].map_or(u, |s| s + u));
        }
    }

    let children = skel.children();
    let first_new = skel.len();
    for (n, sum) in pull.into_iter().enumerate() {
        let Some(sum) = sum else { continue };
        let toward = sum.try_normalize().unwrap_or(dirs[n]);
        let Some(d) = (toward + params.tropism).try_normalize() else {
            continue;
        };
        let d = clamp_to_cone(d, dirs[n], params.branching_angle);
        let p = positions[n] + d * params.internode_length;
        if blocked(obstacles, p) {
            continue;
        }
        let min_gap = DUPLICATE_FRACTION * params.internode_length;
        if children[n]
            .iter()
            .any(|&c| skel.nodes[c].position.distance(p) < min_gap)
        {
            continue;
        }
        skel.push(n, p, step);
        report.added += 1;
    }

    let new_positions: Vec<Vec3> = skel.nodes[first_new..].iter().map(|n| n.position).collect();
    kill_near(markers, &new_positions, params.kill_distance, &mut report.killed);
    report.killed.sort_unstable();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthWarning {
    /// No marker was ever within perception of the trunk.
    Unreachable,
}

impl std::fmt::Display for GrowthWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GrowthWarning::Unreachable => f.write_str("no marker is reachable from the trunk"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Growth {
    pub skeleton: TreeSkeleton,
    /// Marker state after growth.
    pub markers: MarkerSet,
    /// Markers this tree consumed, ascending.
    pub consumed: Vec<usize>,
    /// Last step that added a node (0 if only the trunk exists).
    pub last_step: usize,
    /// Whether growth stopped on its own rather than at `max_steps`.
    pub converged: bool,
    pub warning: Option<GrowthWarning>,
}

fn attracting_centroid(markers: &MarkerSet, obstacles: &[Obstacle]) -> Option<Vec3> {
    let mut sum = Vec3::ZERO;
    let mut n = 0usize;
    for (i, &p) in markers.points.iter().enumerate() {
        if markers.alive[i] && !blocked(obstacles, p) {
            sum += p;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn perceives_any(tip: Vec3, dir: Vec3, markers: &MarkerSet, params: &GenusParams, obstacles: &[Obstacle]) -> bool {
    let cos_cone = params.perception_angle.to_radians().cos();
    markers.points.iter().enumerate().any(|(i, &q)| {
        let v = q - tip;
        let d = v.norm();
        markers.alive[i]
            && d > 0.0
            && d <= params.perception_radius
            && v.dot(dir) >= cos_cone * d
            && !blocked(obstacles, q)
    })
}

/// Straight trunk from `anchor` toward the centroid of the attracting
/// markers, stopping once the tip perceives a marker. All trunk nodes have
/// creation step 0.
fn seed_trunk(anchor: Vec3, markers: &MarkerSet, params: &GenusParams, obstacles: &[Obstacle]) -> TreeSkeleton {
    let mut skel = TreeSkeleton::with_root(anchor);
    let Some(target) = attracting_centroid(markers, obstacles) else {
        return skel;
    };
    let dir = (target - anchor).try_normalize().unwrap_or(Vec3::Z);
    let max_nodes = (anchor.distance(target) / params.internode_length).ceil() as usize;
    let mut tip = 0;
    for _ in 0..max_nodes {
        let p = skel.nodes[tip].position;
        if perceives_any(p, dir, markers, params, obstacles) {
            break;
        }
        let next = p + dir * params.internode_length;
        if blocked(obstacles, next) {
            break;
        }
        tip = skel.push(tip, next, 0);
    }
    skel
}

struct Grower<'a> {
    params: &'a GenusParams,
    skeleton: TreeSkeleton,
    consumed: Vec<usize>,
    last_step: usize,
    done: bool,
}

impl Grower<'_> {
    fn step(&mut self, markers: &mut MarkerSet, obstacles: &[Obstacle], step: usize) -> Result<()> {
        let r = colonize_step(&mut self.skeleton, markers, self.params, obstacles, step)?;
        self.consumed.extend(r.killed);
        if r.added == 0 {
            self.done = true;
        } else {
            self.last_step = step;
        }
        Ok(())
    }

    fn finish(mut self, markers: MarkerSet) -> Result<Growth> {
        self.consumed.sort_unstable();
        self.skeleton
            .assign_radii(self.params.tip_radius, self.params.pipe_exponent)?;
        let warning = (self.last_step == 0).then_some(GrowthWarning::Unreachable);
        if let Some(w) = warning {
            log::warn!("{} (genus {})", w, self.params.name);
        }
        Ok(Growth {
            skeleton: self.skeleton,
            markers,
            consumed: self.consumed,
            last_step: self.last_step,
            converged: self.done,
            warning,
        })
    }
}

fn check_anchor(anchor: Vec3, obstacles: &[Obstacle]) -> Result<()> {
    if !anchor.is_finite() {
        return Err(ArborError::invalid("anchor must be finite"));
    }
    if blocked(obstacles, anchor) {
        return Err(ArborError::invalid("anchor lies inside an obstacle"));
    }
    for o in obstacles {
        o.validate()?;
    }
    Ok(())
}

/// Seeds a trunk at `anchor` and colonizes until a step adds nothing or
/// `max_steps` is reached; radii are then assigned by the pipe model.
pub fn grow(anchor: Vec3, markers: &MarkerSet, params: &GenusParams, obstacles: &[Obstacle]) -> Result<Growth> {
    Ok(
        grow_together(&[anchor], markers, std::slice::from_ref(params), obstacles)?
            .pop()
            .expect("one tree"),
    )
}

/// Grows several trees that compete for one marker set. Trunks are seeded
/// in order, then trees take colonization steps round-robin, so a marker is
/// consumed by at most one tree.
pub fn grow_together(
    anchors: &[Vec3],
    markers: &MarkerSet,
    params: &[GenusParams],
    obstacles: &[Obstacle],
) -> Result<Vec<Growth>> {
    if anchors.len() != params.len() {
        return Err(ArborError::invalid("need one parameter set per anchor"));
    }
    if markers.alive.len() != markers.points.len() {
        return Err(ArborError::invalid("marker alive flags do not match points"));
    }
    let mut markers = markers.clone();
    let mut trees = Vec::with_capacity(anchors.len());
    for (&a, p) in anchors.iter().zip(params) {
        p.validate()?;
        check_anchor(a, obstacles)?;
        trees.push(Grower {
            params: p,
            skeleton: seed_trunk(a, &markers, p, obstacles),
            consumed: Vec::new(),
            last_step: 0,
            done: false,
        });
    }
    let max_steps = params.iter().map(|p| p.max_steps).max().unwrap_or(0);
    for step in 1..=max_steps {
        if trees.iter().all(|t| t.done) {
            break;
        }
        for t in trees.iter_mut() {
            if !t.done && step <= t.params.max_steps {
                t.step(&mut markers, obstacles, step)?;
            }
        }
    }
    trees.into_iter().map(|t| t.finish(markers.clone())).collect()
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub skeleton: TreeSkeleton,
    /// The requested step lies past the end of growth; the skeleton is the
    /// final state.
    pub beyond_termination: bool,
}

/// Grows once and returns the tree as it stood after each requested step,
/// with radii recomputed for that state.
pub fn simulate(
    anchor: Vec3,
    markers: &MarkerSet,
    params: &GenusParams,
    obstacles: &[Obstacle],
    snapshot_steps: &[usize],
) -> Result<(Growth, Vec<Snapshot>)> {
    if snapshot_steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(ArborError::invalid("snapshot steps must be sorted ascending"));
    }
    let growth = grow(anchor, markers, params, obstacles)?;
    let end = if growth.converged {
        growth.last_step
    } else {
        params.max_steps
    };
    let mut out = Vec::with_capacity(snapshot_steps.len());
    for &k in snapshot_steps {
        let mut skeleton = growth.skeleton.prefix(k);
        skeleton.assign_radii(params.tip_radius, params.pipe_exponent)?;
        out.push(Snapshot {
            step: k,
            skeleton,
            beyond_termination: k > end,
        });
    }
    Ok((growth, out))
}
