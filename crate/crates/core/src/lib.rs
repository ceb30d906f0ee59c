pub mod distill;
pub mod envelope;
pub mod error;
pub mod geom;
pub mod growth;
pub mod imaging;
pub mod metrics;
pub mod phenotype;
pub mod pipeline;
pub mod ply;
pub mod render;
pub mod rng;
pub mod spatial;

pub use error::{ArborError, Result};
pub use geom::{Aabb, Vec3};
