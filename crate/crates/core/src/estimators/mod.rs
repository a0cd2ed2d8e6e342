//! Gaze estimators behind one train/predict contract.
//!
//! Three estimators are provided: the multimodal CNN, a kNN regressor whose
//! training samples are clustered in head angle space, and a naive predictor
//! that always returns the mean training gaze.

mod knn;
mod model_io;

pub use knn::{area_resize, KnnConfig, KnnMember, KnnModel};
pub use model_io::{KNN_MAGIC, MEAN_MAGIC};

use image::GrayImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_error, GazeAngles};
use crate::nnengine::{
    forward_batch, train_network, CnnParams, NetInput, NnError, TrainConfig, TrainReport,
    INPUT_HEIGHT, INPUT_WIDTH,
};
use crate::normalize::NormalizedSample;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sample {0} has non-finite angles")]
    NonFiniteSample(usize),
    #[error("eye image is {got:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (u32, u32),
        got: (u32, u32),
    },
    #[error("invalid estimator specification: {0}")]
    InvalidSpec(String),
    #[error("model file does not start with a known magic")]
    BadMagic,
    #[error("model file is truncated: {0}")]
    Truncated(String),
    #[error("cannot predict from an empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Cnn,
    Knn,
    Mean,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Cnn => "cnn",
            EstimatorKind::Knn => "knn",
            EstimatorKind::Mean => "mean",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnn" => Ok(EstimatorKind::Cnn),
            "knn" => Ok(EstimatorKind::Knn),
            "mean" => Ok(EstimatorKind::Mean),
            other => Err(EstimatorError::InvalidSpec(format!(
                "unknown estimator '{other}' (expected cnn, knn or mean)"
            ))),
        }
    }
}

/// Estimator kind, per-kind hyperparameters and the seed. The seed overrides
/// `cnn.seed` and drives the k-means initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub cnn: TrainConfig,
    pub knn: KnnConfig,
    pub seed: u64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self::new(EstimatorKind::Cnn, 0)
    }
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, seed: u64) -> Self {
        Self {
            kind,
            cnn: TrainConfig::default(),
            knn: KnnConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        match self.kind {
            EstimatorKind::Cnn => {
                if !(self.cnn.learning_rate > 0.0) {
                    return Err(EstimatorError::InvalidSpec("lr must be > 0".into()));
                }
                self.cnn.validate()?;
            }
            EstimatorKind::Knn => self.knn.validate()?,
            EstimatorKind::Mean => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Cnn(CnnParams),
    Knn(KnnModel),
    Mean(GazeAngles),
}

impl TrainedModel {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            TrainedModel::Cnn(_) => EstimatorKind::Cnn,
            TrainedModel::Knn(_) => EstimatorKind::Knn,
            TrainedModel::Mean(_) => EstimatorKind::Mean,
        }
    }
}

fn check_image(img: &GrayImage) -> Result<(), EstimatorError> {
    let expected = (INPUT_WIDTH as u32, INPUT_HEIGHT as u32);
    if img.dimensions() != expected {
        return Err(EstimatorError::ShapeMismatch {
            expected,
            got: img.dimensions(),
        });
    }
    Ok(())
}

fn check_training_set(data: &[NormalizedSample]) -> Result<(), EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptyTrainingSet);
    }
    for (i, s) in data.iter().enumerate() {
        if !(s.head.is_finite() && s.gaze.is_finite()) {
            return Err(EstimatorError::NonFiniteSample(i));
        }
        check_image(&s.image)?;
    }
    Ok(())
}

/// Network input for one eye: pixels scaled by 1/255 plus the raw head angle.
pub fn net_input(image: &GrayImage, head: GazeAngles) -> NetInput {
    NetInput {
        pixels: image.as_raw().iter().map(|&p| f64::from(p) / 255.0).collect(),
        head: [head.yaw, head.pitch],
    }
}

/// Trains a model. Mirror augmentation is expected to be applied by the caller.
pub fn train(spec: &EstimatorSpec, data: &[NormalizedSample]) -> Result<TrainedModel, EstimatorError> {
    train_with_report(spec, data).map(|(m, _)| m)
}

/// Like [`train`], also returning the CNN training report when applicable.
pub fn train_with_report(
    spec: &EstimatorSpec,
    data: &[NormalizedSample],
) -> Result<(TrainedModel, Option<TrainReport>), EstimatorError> {
    spec.validate()?;
    check_training_set(data)?;
    match spec.kind {
        EstimatorKind::Mean => {
            let n = data.len() as f64;
            let yaw = data.iter().map(|s| s.gaze.yaw).sum::<f64>() / n;
            let pitch = data.iter().map(|s| s.gaze.pitch).sum::<f64>() / n;
            Ok((TrainedModel::Mean(GazeAngles::new(yaw, pitch)), None))
        }
        EstimatorKind::Knn => Ok((
            TrainedModel::Knn(KnnModel::train(&spec.knn, data, spec.seed)),
            None,
        )),
        EstimatorKind::Cnn => {
            let inputs: Vec<NetInput> = data.iter().map(|s| net_input(&s.image, s.head)).collect();
            let targets: Vec<[f64; 2]> = data.iter().map(|s| [s.gaze.yaw, s.gaze.pitch]).collect();
            let cfg = TrainConfig {
                seed: spec.seed,
                ..spec.cnn.clone()
            };
            let (params, report) = train_network(&inputs, &targets, &cfg, None)?;
            Ok((TrainedModel::Cnn(params), Some(report)))
        }
    }
}

/// Predicts the gaze angle for one equalized eye crop.
pub fn predict(
    model: &TrainedModel,
    image: &GrayImage,
    head: GazeAngles,
) -> Result<GazeAngles, EstimatorError> {
    check_image(image)?;
    match model {
        TrainedModel::Mean(g) => Ok(*g),
        TrainedModel::Knn(m) => Ok(m.predict(image, head)),
        TrainedModel::Cnn(p) => {
            let (out, _) = forward_batch(p, &[net_input(image, head)])?;
            Ok(GazeAngles::new(out[0][0], out[0][1]))
        }
    }
}

/// Predictions for a batch with per-sample angular errors in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPrediction {
    pub predictions: Vec<GazeAngles>,
    pub errors_deg: Vec<f64>,
}

impl BatchPrediction {
    pub fn mean_error(&self) -> f64 {
        self.errors_deg.iter().sum::<f64>() / self.errors_deg.len() as f64
    }
}

const CNN_CHUNK: usize = 256;

pub fn predict_batch(
    model: &TrainedModel,
    samples: &[NormalizedSample],
) -> Result<BatchPrediction, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    for s in samples {
        check_image(&s.image)?;
    }
    let predictions = match model {
        TrainedModel::Cnn(p) => {
            let mut out = Vec::with_capacity(samples.len());
            for chunk in samples.chunks(CNN_CHUNK) {
                let inputs: Vec<NetInput> =
                    chunk.iter().map(|s| net_input(&s.image, s.head)).collect();
                let (pred, _) = forward_batch(p, &inputs)?;
                out.extend(pred.into_iter().map(|g| GazeAngles::new(g[0], g[1])));
            }
            out
        }
        _ => samples
            .iter()
            .map(|s| predict(model, &s.image, s.head))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let errors_deg = predictions
        .iter()
        .zip(samples)
        .map(|(p, s)| angular_error(&p.to_vector(), &s.gaze.to_vector()))
        .collect();
    Ok(BatchPrediction {
        predictions,
        errors_deg,
    })
}
