use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, Vec3};

/// Sensor, optics and exposure settings of the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    /// Horizontal field of view in radians.
    pub fov_horizontal: f64,
    pub shutter_seconds: f64,
    pub iso: f64,
    pub aperture: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            width: 960,
            height: 540,
            fps: 5.0,
            fov_horizontal: 50f64.to_radians(),
            shutter_seconds: 1.0,
            iso: 100.0,
            aperture: 1.0,
            near: 0.1,
            far: 600.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn focal_px(&self) -> f64 {
        f64::from(self.width) / 2.0 / (self.fov_horizontal / 2.0).tan()
    }

    /// Linear-to-display gain. 0.025 at the default triplet.
    pub fn exposure_gain(&self) -> f64 {
        2.5e-4 * self.iso * self.shutter_seconds / (self.aperture * self.aperture)
    }
}

/// A posed pinhole camera. Camera space is x right, y down, z forward.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub origin: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl View {
    pub fn new(pose: Pose2, height: f64, intr: &CameraIntrinsics) -> Self {
        let (s, c) = pose.heading.sin_cos();
        Self {
            origin: Vec3::new(pose.x, pose.y, height),
            forward: Vec3::new(c, s, 0.0),
            right: Vec3::new(s, -c, 0.0),
            down: Vec3::new(0.0, 0.0, -1.0),
            f: intr.focal_px(),
            cx: f64::from(intr.width) / 2.0,
            cy: f64::from(intr.height) / 2.0,
            width: intr.width as usize,
            height: intr.height as usize,
            near: intr.near,
            far: intr.far,
        }
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(self.right), d.dot(self.down), d.dot(self.forward))
    }

    pub fn dir_to_camera(&self, v: Vec3) -> Vec3 {
        Vec3::new(v.dot(self.right), v.dot(self.down), v.dot(self.forward))
    }

    /// Camera-space point to pixel coordinates; `z` must be positive.
    pub fn project(&self, c: Vec3) -> (f64, f64) {
        (self.cx + self.f * c.x / c.z, self.cy + self.f * c.y / c.z)
    }

    /// Unnormalized world ray through pixel position `(px, py)` with unit forward component.
    pub fn ray(&self, px: f64, py: f64) -> Vec3 {
        let x = (px - self.cx) / self.f;
        let y = (py - self.cy) / self.f;
        self.forward + self.right * x + self.down * y
    }
}
