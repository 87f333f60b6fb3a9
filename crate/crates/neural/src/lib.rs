//! Recurrent sequence models for feature forecasting and binary sequence
//! classification, implemented from scratch in 64-bit floating point.
//!
//! The stack is a stacked LSTM (two layers by default) with one of three
//! heads applied to the final hidden state:
//!
//! - linear head with mean-squared-error loss (numeric forecasting),
//! - softmax head with categorical cross-entropy (one-hot forecasting),
//! - single-unit sigmoid head with binary cross-entropy (classification).
//!
//! Training uses adam on analytic gradients from backpropagation through
//! time. Everything is seeded and bit-reproducible: parameter init draws
//! from a counter RNG, batch gradients accumulate in a fixed chunk order
//! regardless of thread count, and checkpoints round-trip exactly.

mod math;
mod net;

pub mod gradcheck;
pub mod train;

pub use net::{HeadKind, LstmFinalState, LstmNet, Workspace};
pub use train::{
    forecast, train, train_classifier, train_forecaster, ForecastHead, TrainConfig, TrainTrace,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("loss became non-finite at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("classifier training set contains a single class")]
    SingleClass,

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
