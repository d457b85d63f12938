//! Variational quantum classifiers and circuit architecture search on a
//! simulated noisy qubit chain.
//!
//! The crate simulates small registers exactly as density matrices under a
//! tunable dephasing channel ([`sim`]), builds layered ansatz circuits and
//! a per-block architecture search space ([`circuits`]), trains classifiers
//! with parameter-shift SGD ([`classifier`]), searches architectures with
//! weight-sharing supernets ([`qas`]), models and corrects readout errors
//! ([`readout`]), and analyzes training trajectories with PCA loss
//! landscapes ([`landscape`]).
//!
//! All numerics are generic over the [`scalar::Scalar`] float type; the
//! aliases below pin `f64`, which the documented tolerances assume.

pub mod circuits;
pub mod classifier;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod qas;
pub mod readout;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// ChaCha stream ids, one per randomness purpose. Every stream is keyed by
/// the single run seed, so one `(config, seed)` pair reproduces a run
/// bit for bit.
pub mod streams {
    pub const PARAM_INIT: u64 = 0;
    pub const BATCH_SHUFFLE: u64 = 1;
    pub const POOL_INIT: u64 = 2;
    pub const SEARCH_SAMPLING: u64 = 3;
    pub const DATASET_SPLIT: u64 = 4;
    /// Plus the supernet id.
    pub const SUPERNET_BASE: u64 = 16;
}

// Concrete `f64` aliases used by the CLI and the test suites.
pub type DensityMatrix64 = sim::DensityMatrix<f64>;
pub type Gate64 = sim::Gate<f64>;
pub type DephasingChannel64 = sim::DephasingChannel<f64>;
pub type CircuitTemplate64 = circuits::CircuitTemplate<f64>;
pub type Sample64 = classifier::Sample<f64>;
pub type DataSplits64 = classifier::DataSplits<f64>;
pub type EvalContext64 = classifier::EvalContext<f64>;
pub type TrainConfig64 = classifier::TrainConfig<f64>;
pub type TrainOutcome64 = classifier::TrainOutcome<f64>;
pub type Trajectory64 = classifier::Trajectory<f64>;
pub type ParameterPool64 = qas::ParameterPool<f64>;
pub type Supernet64 = qas::Supernet<f64>;
pub type QasConfig64 = qas::QasConfig<f64>;
pub type QasOutcome64 = qas::QasOutcome<f64>;
pub type RankedCandidate64 = qas::RankedCandidate<f64>;
pub type CalibrationMatrix64 = readout::CalibrationMatrix<f64>;
pub type ProbabilityVector64 = readout::ProbabilityVector<f64>;
pub type PcaModel64 = landscape::PcaModel<f64>;
pub type LossGrid64 = landscape::LossGrid<f64>;
