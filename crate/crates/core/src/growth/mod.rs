//! Genus-conditioned space colonization and the products derived from a
//! grown skeleton: pipe-model radii, time snapshots, foliage and meshes.

mod colonize;
mod foliage;
mod mesh;
mod obstacle;
mod params;
mod skeleton;

pub use colonize::{colonize_step, grow, grow_together, simulate, Growth, GrowthWarning, Snapshot, StepReport};
pub use foliage::{attach_foliage, foliage_segments, write_leaves_ply, Leaf};
pub use mesh::{export_mesh, TriangleMesh};
pub use obstacle::{blocked, Obstacle};
pub use params::{lookup, preset, presets, GenusParams};
pub use skeleton::{Node, NodeRecord, SkeletonDocument, TreeSkeleton};
