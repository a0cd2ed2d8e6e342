//! Evaluation protocols and reports.
//!
//! Three protocols are supported: cross-dataset (train on one store, test on
//! another), leave-one-person-out and a person-specific positional split.
//! Every protocol produces an [`EvalReport`] holding per-person mean angular
//! errors, their grand mean and standard deviation, and the per-sample error
//! table. Reports can be broken down by illumination and compared with an
//! exact paired Wilcoxon signed-rank test.

mod illumination;
mod protocols;
mod report;
mod wilcoxon;

pub use illumination::{
    error_vs_illumination, error_vs_illumination_with, BinError, IlluminationBreakdown,
};
pub use protocols::{run_cross, run_lopo, run_person_specific, EvalOptions, ProtocolKind, Quota};
pub use report::{EvalReport, PersonError, SampleResult};
pub use wilcoxon::{compare_reports, wilcoxon_signed_rank, WilcoxonResult};

use thiserror::Error;

use crate::data::DataError;
use crate::estimators::EstimatorError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("protocol needs at least 2 persons, store has {0}")]
    InsufficientPersons(usize),
    #[error("{0} store is empty")]
    EmptyStore(&'static str),
    #[error("person {person} has {n} samples, at least 4 are required")]
    InsufficientSamples { person: u64, n: usize },
    #[error("frames unavailable for illumination analysis: {0}")]
    MissingFrames(String),
    #[error("reports share no persons to compare")]
    NoCommonPersons,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EvalError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
        move |source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
