use serde::{Deserialize, Serialize};

use super::{
    epnp_estimate, project, refine_pose, CameraIntrinsics, FaceModel, GeometryError,
    RefineOptions, Rotation, Vec2, Vec3, LANDMARK_COUNT,
};

/// Head rotation (head → camera), head origin and both eye centers in camera
/// coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub rotation: Rotation,
    pub translation: Vec3,
    pub eye_center_left: Vec3,
    pub eye_center_right: Vec3,
}

impl HeadPose {
    pub fn new(model: &FaceModel, rotation: Rotation, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
            eye_center_left: rotation.rotate(&model.left_eye_center()) + translation,
            eye_center_right: rotation.rotate(&model.right_eye_center()) + translation,
        }
    }

    pub fn transform(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Model landmarks in camera coordinates.
    pub fn camera_points(&self, model: &FaceModel) -> [Vec3; LANDMARK_COUNT] {
        model.points().map(|p| self.transform(&p))
    }

    pub fn project_landmarks(
        &self,
        model: &FaceModel,
        k: &CameraIntrinsics,
    ) -> Result<[Vec2; LANDMARK_COUNT], GeometryError> {
        let pts = self.camera_points(model);
        let mut out = [Vec2::zeros(); LANDMARK_COUNT];
        for (o, p) in out.iter_mut().zip(&pts) {
            *o = project(p, k)?;
        }
        Ok(out)
    }
}

/// Sum of squared pixel reprojection errors.
pub fn reprojection_cost(
    model: &FaceModel,
    rotation: &Rotation,
    translation: &Vec3,
    landmarks: &[Vec2; LANDMARK_COUNT],
    k: &CameraIntrinsics,
) -> f64 {
    model
        .points()
        .iter()
        .zip(landmarks)
        .map(|(p, obs)| {
            let pc = rotation.rotate(p) + translation;
            match project(&pc, k) {
                Ok(px) => (px - obs).norm_squared(),
                Err(_) => f64::INFINITY,
            }
        })
        .sum()
}

/// EPnP initialization followed by Levenberg-Marquardt refinement.
pub fn estimate_head_pose(
    model: &FaceModel,
    landmarks: &[Vec2; LANDMARK_COUNT],
    k: &CameraIntrinsics,
) -> Result<HeadPose, GeometryError> {
    let init = epnp_estimate(model, landmarks, k)?;
    refine_pose(&init, model, landmarks, k, &RefineOptions::default())
}
