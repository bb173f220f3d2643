//! Perspective pinhole camera.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

pub const DEFAULT_FOV_DEG: f64 = 40.0;
pub const DEFAULT_DISTANCE_FACTOR: f64 = 2.5;
pub const DEFAULT_RESOLUTION: usize = 768;

/// Pinhole camera looking from `position` at `target`.
///
/// Image coordinates have x to the right and y down; pixel `(i, j)` covers
/// `[i, i+1) x [j, j+1)` so its center is at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

/// A point mapped to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    pub x: f64,
    pub y: f64,
    /// Distance along the viewing axis; positive in front of the camera.
    pub depth: f64,
}

impl Camera {
    pub fn new(position: Vec3, target: Vec3, up: Vec3, fov_deg: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self {
            position,
            target,
            up,
            fov_deg,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let fwd = self.target - self.position;
        if !(fwd.norm() > 0.0) {
            return Err(Error::InvalidCamera("position equals target".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("zero image size".into()));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::InvalidCamera(format!("field of view {} out of range", self.fov_deg)));
        }
        if fwd.normalize().cross(&self.up).norm() < 1e-9 {
            return Err(Error::InvalidCamera("up vector parallel to view axis".into()));
        }
        Ok(())
    }

    /// Camera on a sphere around `target`: azimuth measured in the ground
    /// plane, elevation above it (degrees).
    pub fn orbit(
        target: Vec3,
        distance: f64,
        azimuth_deg: f64,
        elevation_deg: f64,
        up: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let up = up.normalize();
        let helper = if up.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let a = up.cross(&helper).normalize();
        let b = up.cross(&a);
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let dir = (a * az.cos() + b * az.sin()) * el.cos() + up * el.sin();
        Self::new(target + dir * distance, target, up, DEFAULT_FOV_DEG, width, height)
    }

    /// Default framing: looks at the centroid from 2.5 bounding radii.
    pub fn framing(mesh: &TriangleMesh, azimuth_deg: f64, elevation_deg: f64, width: usize, height: usize) -> Result<Self> {
        let (_, radius) = mesh.bounding_sphere();
        let up = mesh.ground_up_axis().unwrap_or_else(Vec3::y);
        Self::orbit(
            mesh.centroid(),
            DEFAULT_DISTANCE_FACTOR * radius.max(f64::MIN_POSITIVE),
            azimuth_deg,
            elevation_deg,
            up,
            width,
            height,
        )
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn forward(&self) -> Vec3 {
        (self.target - self.position).normalize()
    }

    pub fn right(&self) -> Vec3 {
        self.forward().cross(&self.up).normalize()
    }

    /// Image-plane up vector, orthogonal to forward.
    pub fn true_up(&self) -> Vec3 {
        self.right().cross(&self.forward())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.height as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = self.forward();
        let r = f.cross(&self.up).normalize();
        (r, r.cross(&f), f)
    }

    /// Camera-space coordinates (right, up, forward).
    pub fn to_view(&self, p: &Vec3) -> Vec3 {
        let (r, u, f) = self.basis();
        let d = p - self.position;
        Vec3::new(d.dot(&r), d.dot(&u), d.dot(&f))
    }

    pub fn project(&self, p: &Vec3) -> Projected {
        self.project_view(&self.to_view(p))
    }

    pub fn project_view(&self, v: &Vec3) -> Projected {
        let f = self.focal();
        Projected {
            x: self.width as f64 / 2.0 + f * v.x / v.z,
            y: self.height as f64 / 2.0 - f * v.y / v.z,
            depth: v.z,
        }
    }

    /// Unit vectors from each vertex toward the camera.
    pub fn view_directions(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        vertices
            .iter()
            .map(|v| {
                let d = self.position - v;
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    -self.forward()
                }
            })
            .collect()
    }
}
