use crate::envelope::OccupancyVolume;
use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};

/// Solid region that growth may not enter.
#[derive(Debug, Clone, PartialEq)]
pub enum Obstacle {
    Box(Aabb),
    /// Wall: the solid side is where `(p - point) · normal < 0`, i.e. the
    /// normal points out of the wall into free space.
    HalfSpace {
        point: Vec3,
        normal: Vec3,
    },
    /// Space claimed by another tree's crown.
    ForeignEnvelope(OccupancyVolume),
}

impl Obstacle {
    pub fn wall(point: Vec3, normal: Vec3) -> Result<Obstacle> {
        let o = Obstacle::HalfSpace { point, normal };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Box(b) if !b.is_well_formed() => Err(ArborError::invalid("obstacle box needs min <= max")),
            Obstacle::HalfSpace { point, normal } => {
                if !point.is_finite() || !((normal.norm() - 1.0).abs() < 1e-9) {
                    Err(ArborError::invalid("wall normal must be a unit vector"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Obstacle::Box(b) => b.contains(p),
            Obstacle::HalfSpace { point, normal } => (p - *point).dot(*normal) < 0.0,
            Obstacle::ForeignEnvelope(v) => v.contains_point(p),
        }
    }
}

pub fn blocked(obstacles: &[Obstacle], p: Vec3) -> bool {
    obstacles.iter().any(|o| o.contains(p))
}
