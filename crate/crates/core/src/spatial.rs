//! Static 3-d tree for nearest-neighbour and fixed-radius queries.
//!
//! Ties are resolved toward the lowest original point index so every query
//! is a deterministic function of the input order.

use crate::geom::Vec3;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // Permutation of point indices; nodes are implicit (median of each range).
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build_range(points, &mut order, &mut axes, 0, points.len());
        KdTree {
            points: points.to_vec(),
            order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        self.points[idx]
    }

    /// Nearest point to `q` as `(index, squared distance)`.
    pub fn nearest(&self, q: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(q, 0, self.order.len(), &mut best);
        Some(best)
    }

    fn nearest_rec(&self, q: Vec3, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        let d = q.distance_sq(p);
        if d < best.1 || (d == best.1 && idx < best.0) {
            *best = (idx, d);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(q, near.0, near.1, best);
        // `<=` keeps equal-distance candidates reachable for the tie rule.
        if diff * diff <= best.1 {
            self.nearest_rec(q, far.0, far.1, best);
        }
    }

    /// All point indices within `radius` of `q` (inclusive), in ascending index order.
    pub fn within_radius(&self, q: Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(q, radius * radius, 0, self.order.len(), &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, q: Vec3, r2: f64, lo: usize, hi: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        if q.distance_sq(p) <= r2 {
            out.push(idx);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_rec(q, r2, lo, mid, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_rec(q, r2, mid + 1, hi, out);
        }
    }
}

fn build_range(points: &[Vec3], order: &mut [usize], axes: &mut [u8], lo: usize, hi: usize) {
    if hi - lo <= 1 {
        return;
    }
    let slice = &order[lo..hi];
    let bb = crate::geom::Aabb::from_points(slice.iter().map(|&i| points[i])).unwrap();
    let size = bb.size();
    let axis = if size.x >= size.y && size.x >= size.z {
        0
    } else if size.y >= size.z {
        1
    } else {
        2
    };
    let mid = lo + (hi - lo) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    build_range(points, order, axes, lo, mid);
    build_range(points, order, axes, mid + 1, hi);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_nearest(points: &[Vec3], q: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = q.distance_sq(*p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let pts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ];
        let t = KdTree::build(&pts);
        assert_eq!(t.nearest(Vec3::ZERO).unwrap().0, 0);
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::build(&[]);
        assert!(t.nearest(Vec3::ZERO).is_none());
        assert!(t.within_radius(Vec3::ZERO, 1.0).is_empty());
    }

    fn arb_points() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(
            (-5i32..5, -5i32..5, -5i32..5)
                .prop_map(|(x, y, z)| Vec3::new(x as f64 * 0.5, y as f64 * 0.5, z as f64 * 0.5)),
            1..60,
        )
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(pts in arb_points(), q in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)) {
            let q = Vec3::new(q.0, q.1, q.2);
            let t = KdTree::build(&pts);
            prop_assert_eq!(t.nearest(q).unwrap(), brute_nearest(&pts, q));
        }

        #[test]
        fn radius_matches_brute_force(pts in arb_points(), r in 0.0..3.0f64) {
            let q = Vec3::new(0.25, 0.0, -0.25);
            let t = KdTree::build(&pts);
            let expect: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].distance_sq(q) <= r * r).collect();
            prop_assert_eq!(t.within_radius(q, r), expect);
        }
    }
}
