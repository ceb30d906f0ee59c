use std::fmt::Write as _;

use super::skeleton::TreeSkeleton;
use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter().copied())
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn write_obj(&self, path: &std::path::Path) -> Result<()> {
        crate::pipeline::write_atomic(path, self.to_obj().as_bytes())
    }
}

/// One closed truncated cone per edge: a `sides`-gon ring at each end plus a
/// center vertex per cap, giving `2·sides + 2` vertices and `4·sides`
/// triangles per edge.
pub fn export_mesh(skel: &TreeSkeleton, sides: usize) -> Result<TriangleMesh> {
    if sides < 3 {
        return Err(ArborError::invalid("a cross-section needs at least 3 sides"));
    }
    let mut mesh = TriangleMesh::default();
    for (p, c) in skel.edges() {
        let (a, b) = (skel.nodes[p], skel.nodes[c]);
        let axis = (b.position - a.position).try_normalize().unwrap_or(Vec3::Z);
        let (u, v) = axis.orthonormal_basis();
        let base = mesh.vertices.len();
        for (center, r) in [(a.position, a.radius), (b.position, b.radius)] {
            for k in 0..sides {
                let phi = std::f64::consts::TAU * k as f64 / sides as f64;
                mesh.vertices.push(center + (u * phi.cos() + v * phi.sin()) * r);
            }
        }
        let (cap_a, cap_b) = (base + 2 * sides, base + 2 * sides + 1);
        mesh.vertices.push(a.position);
        mesh.vertices.push(b.position);
        for k in 0..sides {
            let k1 = (k + 1) % sides;
            let (a0, a1) = (base + k, base + k1);
            let (b0, b1) = (base + sides + k, base + sides + k1);
            mesh.triangles.push([a0, a1, b1]);
            mesh.triangles.push([a0, b1, b0]);
            mesh.triangles.push([cap_a, a1, a0]);
            mesh.triangles.push([cap_b, b0, b1]);
        }
    }
    Ok(mesh)
}
