//! Minimal deterministic CNN engine for the multimodal gaze regressor.
//!
//! The network is fixed: a 1x36x60 eye image passes through two valid 5x5
//! convolutions (20 and 50 filters), each followed by 2x2 max-pooling, then a
//! 500-unit fully connected layer with rectification. The 2D head angle is
//! appended to the 500 hidden activations and a linear layer regresses the 2D
//! gaze angle. Training minimizes the summed Euclidean distance between
//! predicted and true angles.
//!
//! Spatial dimension chain for the 60x36 input: 56x32 → 28x16 → 24x12 → 12x6,
//! so the fully connected layer sees 50·12·6 = 3600 inputs.

mod gemm;
mod io;
mod network;
mod sgd;
mod tensor;
mod train;

pub use io::{read_params, write_params, CNN_MAGIC};
pub use network::{
    backward, forward, forward_batch, init_params, loss, CnnConfig, CnnParams, ForwardCache,
    Gradients, NetInput, CONV1_FILTERS, CONV2_FILTERS, FC_FEATURES, HIDDEN_UNITS, INPUT_HEIGHT,
    INPUT_WIDTH, KERNEL,
};
pub use sgd::{sgd_step, Sgd};
pub use tensor::Tensor;
pub use train::{train_network, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("model file does not start with the GZCNN1 magic")]
    BadMagic,
    #[error("model file is truncated: {0}")]
    Truncated(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
