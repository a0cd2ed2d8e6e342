use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::NormalizeError;
use crate::geometry::{
    vector_to_angles, CameraIntrinsics, GazeAngles, GeometryError, Rotation, Vec3,
};

/// Virtual camera settings of the normalized space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationParams {
    /// Distance from the virtual camera to the eye center, mm.
    pub distance: f64,
    /// Focal length of the virtual camera, pixels.
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for NormalizationParams {
    fn default() -> Self {
        Self {
            distance: 600.0,
            focal: 960.0,
            width: 60,
            height: 36,
        }
    }
}

impl NormalizationParams {
    pub fn validate(&self) -> Result<(), NormalizeError> {
        if !(self.distance > 0.0) || !self.distance.is_finite() {
            return Err(NormalizeError::InvalidParams(format!(
                "distance must be positive, got {}",
                self.distance
            )));
        }
        if !(self.focal > 0.0) || !self.focal.is_finite() {
            return Err(NormalizeError::InvalidParams(format!(
                "focal length must be positive, got {}",
                self.focal
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(NormalizeError::InvalidParams("crop size must be nonzero".into()));
        }
        Ok(())
    }

    /// Intrinsic matrix of the virtual camera; the principal point is the crop center.
    pub fn camera_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal,
            0.0,
            self.width as f64 / 2.0,
            0.0,
            self.focal,
            self.height as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Rotation and scaling from the real camera to the normalized camera of one eye.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    /// Camera frame → normalized camera frame.
    pub rotation: Rotation,
    /// `distance / ‖eye center‖`.
    pub scale: f64,
    /// Maps homogeneous crop pixels to source-frame pixels.
    pub homography: Matrix3<f64>,
}

impl NormalizationTransform {
    /// Inverse of [`Self::homography`]: source pixels to crop pixels.
    pub fn forward_homography(&self) -> Matrix3<f64> {
        self.homography.try_inverse().unwrap_or_else(Matrix3::zeros)
    }
}

pub fn compute_normalization(
    eye_center: &Vec3,
    head_rotation: &Rotation,
    k: &CameraIntrinsics,
    p: &NormalizationParams,
) -> Result<NormalizationTransform, NormalizeError> {
    p.validate()?;
    let dist = eye_center.norm();
    if !(dist > 0.0) || !(eye_center.z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(eye_center.z).into());
    }
    let z_axis = eye_center / dist;
    let head_x: Vec3 = head_rotation.matrix().column(0).into();
    let y_axis = z_axis.cross(&head_x);
    if y_axis.norm() < 1e-6 {
        return Err(NormalizeError::DegenerateAxes);
    }
    let y_axis = y_axis.normalize();
    let x_axis = y_axis.cross(&z_axis);
    let rot = Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), z_axis.transpose()]);
    let rotation = Rotation::from_matrix(&rot).map_err(NormalizeError::from)?;
    let scale = p.distance / dist;

    let scale_mat = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, scale));
    // (S R)^-1 = R^T S^-1
    let sr_inv = rot.transpose() * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, 1.0 / scale));
    debug_assert!(((scale_mat * rot) * sr_inv - Matrix3::identity()).amax() < 1e-9);
    let cn_inv = p
        .camera_matrix()
        .try_inverse()
        .ok_or_else(|| NormalizeError::InvalidParams("singular virtual camera".into()))?;
    let homography = k.matrix() * sr_inv * cn_inv;
    Ok(NormalizationTransform {
        rotation,
        scale,
        homography,
    })
}

/// 2D head angle: the facing direction (head -z) in the normalized camera.
pub fn normalize_head(
    head_rotation: &Rotation,
    tf: &NormalizationTransform,
) -> Result<GazeAngles, NormalizeError> {
    let rn = tf.rotation * *head_rotation;
    let facing = rn.rotate(&Vec3::new(0.0, 0.0, -1.0));
    Ok(vector_to_angles(&facing)?)
}

/// 2D gaze angle of a camera-frame unit gaze vector. Only the rotation applies
/// to directions.
pub fn normalize_gaze(
    gaze: &Vec3,
    tf: &NormalizationTransform,
) -> Result<GazeAngles, NormalizeError> {
    Ok(vector_to_angles(&tf.rotation.rotate(gaze))?)
}
