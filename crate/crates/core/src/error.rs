//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, training, search, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {got} outside supported range 1..={max}")]
    QubitCount { got: usize, max: usize },

    #[error("qubit index {qubit} out of range for a {num_qubits}-qubit register")]
    QubitIndex { qubit: usize, num_qubits: usize },

    #[error("two-qubit gate requires distinct qubits, got {qubit} twice")]
    DuplicateQubit { qubit: usize },

    #[error("dephasing strength {got} outside [0, 0.5]")]
    NoiseStrength { got: f64 },

    #[error("feature {index} = {value} outside [0, 1]")]
    FeatureRange { index: usize, value: f64 },

    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("classifier output {got} outside [0, 1]")]
    OutputRange { got: f64 },

    #[error("label {got} outside {{0, 1, 2}}")]
    LabelRange { got: i64 },

    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    #[error("block count must be at least 1")]
    BlockCount,

    #[error("supernet count must be at least 1")]
    SupernetCount,

    #[error("epoch count must be at least 1")]
    EpochCount,

    #[error("learning rate {got} must be finite and non-negative")]
    LearningRate { got: f64 },

    #[error("batch size must be at least 1")]
    BatchSize,

    #[error("invalid circuit template: {0}")]
    TemplateShape(String),

    #[error("genotype does not match search space: {0}")]
    GenotypeShape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix {name} is singular (rank-deficient within {tol:e})")]
    SingularMatrix { name: String, tol: f64 },

    #[error("not a probability vector: {0}")]
    Probability(String),

    #[error("invalid calibration matrix: {0}")]
    Calibration(String),

    #[error("invalid trajectory for PCA: {0}")]
    Pca(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
