use serde::{Deserialize, Serialize};

use crate::geometry::{CameraDesc, Ray};
use crate::math::Vec3;

/// Pinhole camera. Pixel rows run top to bottom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub origin: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub vfov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn look_at(origin: Vec3, target: Vec3, up_hint: Vec3, vfov_deg: f64, width: usize, height: usize) -> Camera {
        let forward = (target - origin).normalized();
        let mut right = forward.cross(up_hint);
        if right.length() < 1e-6 {
            // looking along the up hint
            let alt = if forward.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
            right = forward.cross(alt);
        }
        let right = right.normalized();
        let up = right.cross(forward);
        Camera { origin, forward, right, up, vfov_deg, width, height }
    }

    pub fn from_desc(desc: &CameraDesc, width: usize, height: usize) -> Camera {
        Camera::look_at(desc.position, desc.look_at, desc.up, desc.vfov_deg, width, height)
    }

    /// Ray through image position `(px + sx, py + sy)` in pixel units.
    pub fn ray(&self, px: usize, py: usize, sx: f64, sy: f64) -> Ray {
        let tan = (self.vfov_deg.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let x = (2.0 * (px as f64 + sx) / self.width as f64 - 1.0) * tan * aspect;
        let y = (1.0 - 2.0 * (py as f64 + sy) / self.height as f64) * tan;
        Ray::new(self.origin, (self.forward + self.right * x + self.up * y).normalized())
    }

    pub fn center_ray(&self, px: usize, py: usize) -> Ray {
        self.ray(px, py, 0.5, 0.5)
    }
}
