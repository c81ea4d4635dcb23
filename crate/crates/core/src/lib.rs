//! Model selection for quantum Boltzmann models learned from classical shadows.
//!
//! Measurement records from random single-qubit Pauli measurements are fitted by
//! two estimators (maximum likelihood and shadow cross entropy) and scored by
//! classical and quantum information criteria.

pub mod criteria;
pub mod error;
pub mod fisher;
pub mod fit;
pub mod harness;
pub mod linalg;
pub mod pauli;
pub mod povm;
pub mod qhbm;
pub mod rng;
pub mod shadow;

pub use criteria::{CriterionKind, CriterionReport};
pub use error::{Error, Result};
pub use fisher::{InfoKind, InfoMatrix};
pub use fit::{EstimatorKind, FitRecord, FitResult, OptimizerConfig};
pub use harness::{run_experiment, run_trial, ExperimentConfig, ExperimentContext, TrialRecord};
pub use linalg::{DensityMatrix, HermMatrix};
pub use povm::{MeasurementOutcome, OutcomeCounts};
pub use qhbm::{FrozenModel, QhbmModel, StateFamily};
