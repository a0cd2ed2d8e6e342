//! Dataset ingestion, the normalized sample store, the synthetic eye-scene
//! generator, per-person subsampling and illumination statistics.
//!
//! # Manifest format
//!
//! A manifest is UTF-8 JSON-lines, one raw record per line:
//!
//! | field | type | meaning |
//! |---|---|---|
//! | `person_id` | integer | participant identifier |
//! | `image` | string | path of a binary PGM (P5) frame, relative to the manifest directory |
//! | `landmarks` | `[[x, y]; 6]` | pixel coordinates in landmark order (right eye outer, right eye inner, left eye inner, left eye outer, mouth right, mouth left) |
//! | `intrinsics` | object | `fx`, `fy`, `cx`, `cy`, `width`, `height` |
//! | `gaze_target` | `[x, y, z]` | gaze target in camera coordinates, millimetres |
//! | `hour` | integer, optional | hour of day (0-23) the frame was captured |
//!
//! # Store format
//!
//! `GZNRM1\0\0` followed by fixed-size little-endian records: person id
//! (`u64`), eye side (`u8`, 0 left, 1 right already mirrored into left-eye
//! space), 2160 image bytes (60x36 row-major), then head yaw, head pitch,
//! gaze yaw and gaze pitch as `f64` radians.

mod manifest;
mod pgm;
mod pipeline;
mod stats;
mod store;
mod subsample;
mod synth;

pub use manifest::{load_manifest, parse_manifest, write_manifest, Manifest, RawRecord, SkippedLine};
pub use pgm::{read_pgm, write_pgm};
pub use pipeline::{normalize_manifest, normalize_synth, IndexEntry, NormalizedSet};
pub use stats::{
    compute_stats, difference_bin, frame_illumination, intensity_bin, DatasetStats,
    FrameIllumination, DIFFERENCE_BINS, DIFFERENCE_BIN_WIDTH, DIFFERENCE_MIN, INTENSITY_BINS,
    INTENSITY_BIN_WIDTH,
};
pub use store::{read_store, read_store_from, write_store, write_store_to, STORE_MAGIC, STORE_RECORD_LEN};
pub use subsample::{subsample_indices, subsample_per_person};
pub use synth::{
    frame_name, generate_record, person_appearance, synth_generate, synth_records, EyeTruth, PersonAppearance,
    Range, SynthConfig, SynthRecord, TruthRecord,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{bad} of {total} manifest lines are malformed (first: line {first_line}: {first_reason})")]
    MalformedRecord {
        bad: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
    },
    #[error("store does not start with the GZNRM1 magic")]
    BadMagic,
    #[error("store record {0} is truncated")]
    TruncatedRecord(usize),
    #[error("store record {index} is corrupt: {reason}")]
    CorruptRecord { index: usize, reason: String },
    #[error("sample {index} cannot be stored: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("invalid frame {path}: {reason}")]
    InvalidFrame { path: PathBuf, reason: String },
    #[error("synthesis configuration out of range: {0}")]
    ConfigOutOfRange(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> DataError {
        let path = path.into();
        move |source| DataError::Io { path, source }
    }
}
