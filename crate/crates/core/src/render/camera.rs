use serde::{Deserialize, Serialize};

use crate::error::{ArborError, Result};
use crate::geom::{Aabb, Vec3};

/// Orbit camera looking at the center of the grid extent. The world is
/// z-up; azimuth 0 places the camera on the -y side looking toward +y and
/// azimuth increases counter-clockwise seen from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub azimuth: f64,
    pub elevation: f64,
    pub radius: f64,
    /// Vertical field of view in degrees.
    pub fov: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraPose {
    /// Default front view: azimuth 0, elevation 0, radius 2.5x the largest
    /// extent side, 30 degree field of view.
    pub fn front(extent: &Aabb, width: usize, height: usize) -> Self {
        let s = extent.size();
        CameraPose {
            azimuth: 0.0,
            elevation: 0.0,
            radius: 2.5 * s.x.max(s.y).max(s.z),
            fov: 30.0,
            width,
            height,
        }
    }

    pub fn with_azimuth(mut self, azimuth: f64) -> Self {
        self.azimuth = azimuth;
        self
    }

    pub fn with_elevation(mut self, elevation: f64) -> Self {
        self.elevation = elevation;
        self
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self, extent: &Aabb) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(ArborError::invalid("camera radius must be positive"));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(ArborError::invalid("camera fov must lie in (0, 180) degrees"));
        }
        if !(self.elevation.abs() < 90.0) {
            return Err(ArborError::invalid("camera elevation must lie in (-90, 90) degrees"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ArborError::invalid("image size must be positive"));
        }
        if extent.contains(self.eye(extent)) {
            return Err(ArborError::invalid(
                "camera radius places the eye inside the grid extent",
            ));
        }
        Ok(())
    }

    pub fn eye(&self, extent: &Aabb) -> Vec3 {
        let (sa, ca) = self.azimuth.to_radians().sin_cos();
        let (se, ce) = self.elevation.to_radians().sin_cos();
        extent.center() + Vec3::new(sa * ce, -ca * ce, se) * self.radius
    }

    /// Orthonormal camera frame `(forward, right, up)`.
    pub fn frame(&self, extent: &Aabb) -> (Vec3, Vec3, Vec3) {
        let forward = (extent.center() - self.eye(extent)).normalize();
        let right = forward.cross(Vec3::Z).normalize();
        let up = right.cross(forward);
        (forward, right, up)
    }

    /// Precomputed ray generator for this pose.
    pub fn rays(&self, extent: &Aabb) -> RayGen {
        let (forward, right, up) = self.frame(extent);
        let tan = (self.fov.to_radians() * 0.5).tan();
        RayGen {
            eye: self.eye(extent),
            forward,
            right: right * (tan * self.width as f64 / self.height as f64),
            up: up * tan,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RayGen {
    pub eye: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    width: usize,
    height: usize,
}

impl RayGen {
    /// Unit ray direction through the center of pixel `(x, y)`; row 0 is the top.
    pub fn direction(&self, x: usize, y: usize) -> Vec3 {
        let u = (x as f64 + 0.5) / self.width as f64 * 2.0 - 1.0;
        let v = 1.0 - (y as f64 + 0.5) / self.height as f64 * 2.0;
        (self.forward + self.right * u + self.up * v).normalize()
    }
}
