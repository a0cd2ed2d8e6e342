use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::{
    compute_normalization, equalize, normalize_gaze, normalize_head, warp_eye,
    NormalizationParams, NormalizeError,
};
use crate::geometry::{
    estimate_head_pose, CameraIntrinsics, FaceModel, GazeAngles, HeadPose, Rotation, Vec2, Vec3,
    LANDMARK_COUNT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeSide {
    Left,
    Right,
}

impl EyeSide {
    pub fn other(self) -> Self {
        match self {
            EyeSide::Left => EyeSide::Right,
            EyeSide::Right => EyeSide::Left,
        }
    }
}

/// One normalized eye: equalized crop, head angle and gaze angle.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    pub image: GrayImage,
    pub head: GazeAngles,
    pub gaze: GazeAngles,
    pub person_id: u64,
    /// Eye the sample was cut from. Right eyes produced by
    /// [`normalize_record`] are already flipped into left-eye space.
    pub eye_side: EyeSide,
}

fn flip_horizontal(s: &NormalizedSample) -> NormalizedSample {
    NormalizedSample {
        image: image::imageops::flip_horizontal(&s.image),
        head: s.head.mirrored(),
        gaze: s.gaze.mirrored(),
        person_id: s.person_id,
        eye_side: s.eye_side,
    }
}

/// Horizontal flip of the crop with yaw negation of both angles and the eye
/// side swapped.
pub fn mirror_sample(s: &NormalizedSample) -> NormalizedSample {
    let mut m = flip_horizontal(s);
    m.eye_side = s.eye_side.other();
    m
}

/// Normalizes a single eye given its 3D center, the head rotation and the
/// gaze target, all in camera coordinates.
#[allow(clippy::too_many_arguments)]
pub fn normalize_eye(
    frame: &GrayImage,
    eye_center: &Vec3,
    head_rotation: &Rotation,
    gaze_target: &Vec3,
    k: &CameraIntrinsics,
    p: &NormalizationParams,
    person_id: u64,
    eye_side: EyeSide,
) -> Result<NormalizedSample, NormalizeError> {
    let tf = compute_normalization(eye_center, head_rotation, k, p)?;
    let warped = warp_eye(frame, &tf, p)?;
    let head = normalize_head(head_rotation, &tf)?;
    let gaze_vec = (gaze_target - eye_center).normalize();
    let gaze = normalize_gaze(&gaze_vec, &tf)?;
    Ok(NormalizedSample {
        image: equalize(&warped.image),
        head,
        gaze,
        person_id,
        eye_side,
    })
}

/// Full per-record pipeline: head pose from landmarks, then both eyes.
///
/// Returns `(left, right)`; the right sample is mirrored into left-eye space.
pub fn normalize_record(
    frame: &GrayImage,
    landmarks: &[Vec2; LANDMARK_COUNT],
    gaze_target: &Vec3,
    k: &CameraIntrinsics,
    model: &FaceModel,
    p: &NormalizationParams,
    person_id: u64,
) -> Result<(NormalizedSample, NormalizedSample, HeadPose), NormalizeError> {
    let pose = estimate_head_pose(model, landmarks, k)?;
    let left = normalize_eye(
        frame,
        &pose.eye_center_left,
        &pose.rotation,
        gaze_target,
        k,
        p,
        person_id,
        EyeSide::Left,
    )?;
    let right = normalize_eye(
        frame,
        &pose.eye_center_right,
        &pose.rotation,
        gaze_target,
        k,
        p,
        person_id,
        EyeSide::Right,
    )?;
    Ok((left, flip_horizontal(&right), pose))
}
