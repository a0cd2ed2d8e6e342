use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec2, Vec3};

/// Pinhole intrinsics of an undistorted camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive and finite (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// The 3x3 calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn project(&self, p: &Vec3) -> Result<Vec2, GeometryError> {
        project(p, self)
    }

    pub fn contains(&self, px: &Vec2) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project(p: &Vec3, k: &CameraIntrinsics) -> Result<Vec2, GeometryError> {
    if p.z <= 0.0 || p.z.is_nan() {
        return Err(GeometryError::NonPositiveDepth(p.z));
    }
    Ok(Vec2::new(
        k.fx * p.x / p.z + k.cx,
        k.fy * p.y / p.z + k.cy,
    ))
}
