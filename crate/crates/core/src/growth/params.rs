use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::geom::Vec3;

/// Growth parameters for one genus. Lengths are in meters of the envelope
/// frame, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenusParams {
    pub name: String,
    pub perception_radius: f64,
    /// Half-angle of the cone around a bud's growth direction.
    pub perception_angle: f64,
    pub kill_distance: f64,
    pub internode_length: f64,
    /// Largest allowed angle between a new internode and its parent internode.
    pub branching_angle: f64,
    pub pipe_exponent: f64,
    pub tip_radius: f64,
    pub tropism: Vec3,
    pub max_steps: usize,
}

impl GenusParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ArborError::invalid(format!("genus {}: {m}", self.name)));
        let finite = [
            self.perception_radius,
            self.perception_angle,
            self.kill_distance,
            self.internode_length,
            self.branching_angle,
            self.pipe_exponent,
            self.tip_radius,
        ]
        .iter()
        .all(|v| v.is_finite())
            && self.tropism.is_finite();
        if !finite {
            return bad("parameters must be finite");
        }
        if !(self.internode_length > 0.0) {
            return bad("internode_length must be positive");
        }
        if !(self.kill_distance > 0.0 && self.kill_distance < self.perception_radius) {
            return bad("need 0 < kill_distance < perception_radius");
        }
        if !(self.pipe_exponent >= 1.0) {
            return bad("pipe_exponent must be at least 1");
        }
        if !(self.tip_radius > 0.0) {
            return bad("tip_radius must be positive");
        }
        if !(self.perception_angle > 0.0 && self.perception_angle <= 180.0) {
            return bad("perception_angle must lie in (0, 180]");
        }
        if !(self.branching_angle > 0.0 && self.branching_angle <= 180.0) {
            return bad("branching_angle must lie in (0, 180]");
        }
        Ok(())
    }
}

/// Built-in presets for five common street-tree genera.
///
/// The numbers are estimates chosen for crowns about two meters across in
/// the reconstruction frame. They are not measured botanical data.
pub fn presets() -> Vec<GenusParams> {
    let g = |name: &str, pr, pa, kd, il, ba, tip, tz| GenusParams {
        name: name.to_string(),
        perception_radius: pr,
        perception_angle: pa,
        kill_distance: kd,
        internode_length: il,
        branching_angle: ba,
        pipe_exponent: 2.0,
        tip_radius: tip,
        tropism: Vec3::new(0.0, 0.0, tz),
        max_steps: 300,
    };
    vec![
        g("Cupressus", 0.30, 75.0, 0.10, 0.040, 40.0, 0.004, 0.15),
        g("Magnolia", 0.35, 90.0, 0.10, 0.050, 60.0, 0.005, 0.05),
        g("Pinus", 0.30, 85.0, 0.10, 0.050, 70.0, 0.005, -0.05),
        g("Ligustrum", 0.25, 90.0, 0.08, 0.035, 55.0, 0.004, 0.0),
        g("Cinnamomum", 0.35, 90.0, 0.11, 0.050, 55.0, 0.005, 0.08),
    ]
}

/// Case-insensitive preset lookup.
pub fn preset(name: &str) -> Result<GenusParams> {
    lookup(&presets(), name)
}

pub fn lookup(table: &[GenusParams], name: &str) -> Result<GenusParams> {
    table
        .iter()
        .find(|g| g.name.eq_ignore_ascii_case(name))
        .cloned()
        .ok_or_else(|| ArborError::invalid(format!("unknown genus {name:?}")))
}
