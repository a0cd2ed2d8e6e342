use serde::{Deserialize, Serialize};

use super::{GeometryError, Rotation, Vec3};

/// 2D direction as (yaw, pitch) in radians.
///
/// `(0, 0)` looks straight back into the camera; positive yaw turns towards
/// camera -x and positive pitch towards camera -y (up).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeAngles {
    pub yaw: f64,
    pub pitch: f64,
}

impl GazeAngles {
    pub fn new(yaw: f64, pitch: f64) -> Self {
        Self { yaw, pitch }
    }

    pub fn to_vector(self) -> Vec3 {
        angles_to_vector(self)
    }

    /// Mirror around the vertical axis.
    pub fn mirrored(self) -> Self {
        Self {
            yaw: -self.yaw,
            pitch: self.pitch,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.yaw.is_finite() && self.pitch.is_finite()
    }
}

pub fn angles_to_vector(g: GazeAngles) -> Vec3 {
    let (sy, cy) = g.yaw.sin_cos();
    let (sp, cp) = g.pitch.sin_cos();
    Vec3::new(-cp * sy, -sp, -cp * cy)
}

/// Inverse of [`angles_to_vector`] for unit vectors pointing towards the camera.
pub fn vector_to_angles(v: &Vec3) -> Result<GazeAngles, GeometryError> {
    if !(v.z < 0.0) {
        return Err(GeometryError::InvalidGazeDirection(v.z));
    }
    Ok(GazeAngles {
        yaw: (-v.x).atan2(-v.z),
        pitch: (-v.y).clamp(-1.0, 1.0).asin(),
    })
}

/// Angle between two unit vectors, in degrees.
pub fn angular_error(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

impl Rotation {
    /// Rotates a direction expressed as angles and converts it back.
    pub fn rotate_angles(&self, g: GazeAngles) -> Result<GazeAngles, GeometryError> {
        vector_to_angles(&self.rotate(&angles_to_vector(g)))
    }
}
