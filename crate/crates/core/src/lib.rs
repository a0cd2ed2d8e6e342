//! Monocular appearance-based gaze estimation.
//!
//! The crate covers the whole pipeline from six facial landmarks in a camera
//! frame to a gaze direction:
//!
//! - [`geometry`]: pinhole projection, rotations, gaze angle conventions and
//!   head pose fitting (EPnP followed by Levenberg-Marquardt refinement).
//! - [`normalize`]: virtual-camera normalization of each eye into a fixed
//!   60x36 histogram-equalized crop with 2D head and gaze angles.
//! - [`nnengine`]: a small deterministic CNN engine implementing the
//!   multimodal LeNet-style regressor.
//! - [`estimators`]: the CNN, a head-pose clustered kNN and the naive mean
//!   predictor behind one train/predict contract.
//! - [`data`]: manifests, frames, the normalized sample store, the synthetic
//!   eye-scene generator and dataset statistics.
//! - [`eval`]: cross-dataset, leave-one-person-out and person-specific
//!   protocols, reports and illumination breakdowns.

pub mod data;
pub mod estimators;
pub mod eval;
pub mod geometry;
pub mod nnengine;
pub mod normalize;

mod error;

pub use error::{Error, Result};
