//! Eye-image and angle normalization through a virtual camera.
//!
//! For each eye the camera is rotated to look straight at the eye center and
//! scaled so the eye appears at a fixed distance, with the camera x axis kept
//! parallel to the head x axis. The eye is then cropped at a fixed size and
//! focal length, histogram-equalized, and the head and gaze directions are
//! expressed as 2D (yaw, pitch) angles in the normalized camera frame.

mod equalize;
mod sample;
mod transform;
mod warp;

pub use equalize::equalize;
pub use sample::{mirror_sample, normalize_eye, normalize_record, EyeSide, NormalizedSample};
pub use transform::{
    compute_normalization, normalize_gaze, normalize_head, NormalizationParams,
    NormalizationTransform,
};
pub use warp::{warp_eye, WarpedEye};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalizeError {
    #[error("normalization axes are degenerate: eye direction is parallel to the head x axis")]
    DegenerateAxes,
    #[error("{:.1}% of the eye crop falls outside the source frame", .0 * 100.0)]
    FullyOutOfBounds(f64),
    #[error("invalid normalization parameters: {0}")]
    InvalidParams(String),
    #[error("source frame is empty")]
    EmptyFrame,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
