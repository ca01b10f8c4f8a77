//! Coverage diagnostics for samplers of Bayesian nonnegative matrix
//! factorization.
//!
//! The crate builds small datasets with known solution sets, runs samplers
//! (Gibbs, HMC, random restarts and two reference baselines), and measures how
//! much of the solution set each chain reached using permutation- and
//! scale-invariant distances between basis matrices and persistent covering
//! numbers. [`harness`] ties it together into repeatable experiments.

pub mod coverage;
pub mod datasets;
pub mod diagnostics;
pub mod error;
pub mod factorization;
pub mod harness;
pub mod matrix;
pub mod model;
pub mod optimizers;
pub mod rng;
pub mod samplers;
pub mod similarity;
pub mod stats;

pub use coverage::{DistanceMatrix, PersistenceCurve};
pub use datasets::{by_name, Dataset, Mode, DATASET_NAMES};
pub use error::{Error, Result};
pub use factorization::Factorization;
pub use harness::{run_experiment, ExperimentConfig, Profile, Report};
pub use matrix::Matrix;
pub use model::ModelParams;
pub use samplers::{Method, SampleChain};
pub use similarity::Measure;
