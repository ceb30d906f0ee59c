use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub position: Vec3,
    pub parent: Option<usize>,
    pub radius: f64,
    pub creation_step: usize,
}

/// Rooted branching graph. Growth appends nodes in creation order, so
/// parents always precede their children, but loaded skeletons need not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeSkeleton {
    pub nodes: Vec<Node>,
}

impl TreeSkeleton {
    pub fn with_root(position: Vec3) -> Self {
        TreeSkeleton {
            nodes: vec![Node {
                position,
                parent: None,
                radius: 0.0,
                creation_step: 0,
            }],
        }
    }

    /// Straight chain through `points`, all created at step 0.
    pub fn chain(points: &[Vec3]) -> Self {
        let mut s = TreeSkeleton::default();
        for (i, &p) in points.iter().enumerate() {
            s.nodes.push(Node {
                position: p,
                parent: i.checked_sub(1),
                radius: 0.0,
                creation_step: 0,
            });
        }
        s
    }

    pub fn push(&mut self, parent: usize, position: Vec3, creation_step: usize) -> usize {
        self.nodes.push(Node {
            position,
            parent: Some(parent),
            radius: 0.0,
            creation_step,
        });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.parent.is_none())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                c[p].push(i);
            }
        }
        c
    }

    /// `(parent, child)` pairs in child index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| (p, i)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn max_radius(&self) -> f64 {
        self.nodes.iter().map(|n| n.radius).fold(0.0, f64::max)
    }

    /// Growth direction at node `i`: from its parent, or `+z` at the root.
    pub fn direction(&self, i: usize) -> Vec3 {
        self.nodes[i]
            .parent
            .and_then(|p| (self.nodes[i].position - self.nodes[p].position).try_normalize())
            .unwrap_or(Vec3::Z)
    }

    /// Checks single root, in-range parents, acyclicity (union-find) and
    /// non-decreasing creation steps along edges.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Ok(());
        }
        let roots = self.nodes.iter().filter(|n| n.parent.is_none()).count();
        if roots != 1 {
            return Err(ArborError::invalid(format!("skeleton has {roots} roots")));
        }
        let mut uf: Vec<usize> = (0..n).collect();
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.position.is_finite() || !node.radius.is_finite() || node.radius < 0.0 {
                return Err(ArborError::invalid(format!(
                    "node {i} has non-finite or negative values"
                )));
            }
            let Some(p) = node.parent else { continue };
            if p >= n {
                return Err(ArborError::invalid(format!("node {i} has out-of-range parent {p}")));
            }
            if self.nodes[p].creation_step > node.creation_step {
                return Err(ArborError::invalid(format!("node {i} was created before its parent")));
            }
            let (a, b) = (find(&mut uf, i), find(&mut uf, p));
            if a == b {
                return Err(ArborError::invalid(format!("cycle through node {i}")));
            }
            uf[a] = b;
        }
        Ok(())
    }

    /// Nodes ordered so every parent precedes its children (breadth-first
    /// from the root, children by index).
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let Some(root) = self.root() else {
            return Ok(Vec::new());
        };
        let children = self.children();
        let mut order = Vec::with_capacity(self.nodes.len());
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            order.extend(&children[v]);
        }
        Ok(order)
    }

    /// Pipe-model radii: leaves get `tip_radius`, interior nodes
    /// `(Σ r_child^n)^(1/n)`.
    pub fn assign_radii(&mut self, tip_radius: f64, exponent: f64) -> Result<()> {
        if !(tip_radius > 0.0) || !(exponent >= 1.0) {
            return Err(ArborError::invalid("need tip_radius > 0 and pipe exponent >= 1"));
        }
        let order = self.topological_order()?;
        let mut sum = vec![0.0f64; self.nodes.len()];
        for &v in order.iter().rev() {
            let r = if sum[v] == 0.0 {
                tip_radius
            } else {
                sum[v].powf(1.0 / exponent)
            };
            self.nodes[v].radius = r;
            if let Some(p) = self.nodes[v].parent {
                sum[p] += r.powf(exponent);
            }
        }
        Ok(())
    }

    /// The nodes created at or before `step`. Requires nodes sorted by
    /// creation step, as produced by growth.
    pub fn prefix(&self, step: usize) -> TreeSkeleton {
        let k = self.nodes.partition_point(|n| n.creation_step <= step);
        TreeSkeleton {
            nodes: self.nodes[..k].to_vec(),
        }
    }

    pub fn transformed(&self, f: impl Fn(Vec3) -> Vec3, radius_scale: f64) -> TreeSkeleton {
        TreeSkeleton {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    position: f(n.position),
                    radius: n.radius * radius_scale,
                    ..*n
                })
                .collect(),
        }
    }

    pub fn to_document(&self, genus: &str, seed: u64) -> SkeletonDocument {
        SkeletonDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    p: n.position.to_array(),
                    parent: n.parent.map_or(-1, |p| p as i64),
                    r: n.radius,
                    step: n.creation_step,
                })
                .collect(),
            genus: genus.to_string(),
            seed,
        }
    }

    pub fn to_json(&self, genus: &str, seed: u64) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(genus, seed))?)
    }

    pub fn write_json(&self, path: &std::path::Path, genus: &str, seed: u64) -> Result<()> {
        crate::pipeline::write_atomic(path, self.to_json(genus, seed)?.as_bytes())
    }

    pub fn read_json(path: &std::path::Path) -> Result<(TreeSkeleton, SkeletonDocument)> {
        let doc: SkeletonDocument = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok((doc.to_skeleton()?, doc))
    }
}

/// On-disk skeleton: `{"nodes":[{"p":[x,y,z],"parent":i|-1,"r":m,"step":k}],"genus":..,"seed":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonDocument {
    pub nodes: Vec<NodeRecord>,
    pub genus: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub p: [f64; 3],
    pub parent: i64,
    pub r: f64,
    pub step: usize,
}

impl SkeletonDocument {
    pub fn to_skeleton(&self) -> Result<TreeSkeleton> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, r) in self.nodes.iter().enumerate() {
            let parent = match r.parent {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => return Err(ArborError::format("skeleton", format!("node {i} has parent {p}"))),
            };
            nodes.push(Node {
                position: Vec3::from(r.p),
                parent,
                radius: r.r,
                creation_step: r.step,
            });
        }
        let s = TreeSkeleton { nodes };
        s.validate()
            .map_err(|e| ArborError::format("skeleton", e.to_string()))?;
        Ok(s)
    }
}
