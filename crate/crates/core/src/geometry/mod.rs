//! Camera geometry and 3D head pose estimation.
//!
//! Coordinates follow the usual computer-vision camera frame: x to the right,
//! y down, z forward along the optical axis. Lengths are millimetres, image
//! coordinates are pixels and angles are radians unless a name says otherwise.

mod angles;
mod camera;
mod epnp;
mod face_model;
mod pose;
mod refine;
mod rotation;

pub use angles::{angles_to_vector, angular_error, vector_to_angles, GazeAngles};
pub use camera::{project, CameraIntrinsics};
pub use epnp::epnp_estimate;
pub use face_model::{FaceModel, Landmark, LANDMARK_COUNT};
pub use pose::{estimate_head_pose, reprojection_cost, HeadPose};
pub use refine::{refine_pose, RefineOptions};
pub use rotation::Rotation;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("gaze direction does not point towards the camera (z = {0})")]
    InvalidGazeDirection(f64),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("pose refinement diverged: {0}")]
    DivergedRefinement(&'static str),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("matrix is not a rotation (orthonormality error {0:e})")]
    NotARotation(f64),
    #[error("invalid face model: {0}")]
    InvalidFaceModel(String),
}
