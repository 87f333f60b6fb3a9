//! Pipeline orchestration: configuration, stage execution over on-disk
//! artifacts, and run manifests. The `kcn` binary is a thin wrapper over
//! this crate.

pub mod config;
pub mod manifest;
pub mod stages;

use kcn_core::CoreError;
use kcn_neural::NeuralError;

/// Stage failures carry their exit-code category: usage (1), data (2),
/// numeric (3).
#[derive(Debug)]
pub enum StageError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Usage(_) => 1,
            StageError::Data(_) => 2,
            StageError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            StageError::Usage(m) | StageError::Data(m) | StageError::Numeric(m) => m,
        }
    }
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self {
            StageError::Usage(_) => "usage",
            StageError::Data(_) => "data",
            StageError::Numeric(_) => "numeric",
        };
        write!(f, "{kind} error: {}", self.message())
    }
}

impl std::error::Error for StageError {}

impl From<CoreError> for StageError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFiniteCentrality { .. } => StageError::Numeric(e.to_string()),
            other => StageError::Data(other.to_string()),
        }
    }
}

impl From<NeuralError> for StageError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::NanLoss { .. } => StageError::Numeric(e.to_string()),
            other => StageError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for StageError {
    fn from(e: std::io::Error) -> Self {
        StageError::Data(e.to_string())
    }
}

/// Derives a per-purpose seed from the run seed and a fixed stream id
/// (splitmix64 finalizer), so stages running in separate processes agree.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
