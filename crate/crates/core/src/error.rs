use thiserror::Error;

use crate::data::DataError;
use crate::estimators::EstimatorError;
use crate::eval::EvalError;
use crate::geometry::GeometryError;
use crate::nnengine::NnError;
use crate::normalize::NormalizeError;

/// Crate-wide error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
