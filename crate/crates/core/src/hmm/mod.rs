//! Continuous-density hidden Markov models with diagonal-covariance Gaussian
//! mixture emissions.
//!
//! All probabilities are carried as natural logarithms. Forward, backward and
//! Viterbi recursions combine predecessor terms with [`log_sum_exp`] rather
//! than per-frame scaling coefficients, so long utterances never underflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod file;
mod gmm;
mod inference;
mod init;
mod model;
mod train;

pub use gmm::{gmm_log_density, Gmm};
pub use inference::{
    backward_log, emission_log_matrix, forward_log, forward_log_matrix, state_posteriors, viterbi,
};
pub use init::{init_model, kmeans, variance_floor, KMeans};
pub use model::HmmModel;
pub use train::{baum_welch, TrainOptions, TrainReport};

/// Tolerance for simplex constraints on `π`, rows of `A` and mixture weights.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Multiplier on the global per-dimension data variance giving the variance floor.
pub const VARIANCE_FLOOR_SCALE: f64 = 1e-3;

/// Lower bound on the variance floor for dimensions with no spread at all.
pub const MIN_VARIANCE: f64 = 1e-8;

/// States whose total occupancy in an iteration falls below this keep their emissions.
pub const MIN_OCCUPANCY: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observation sequence is empty")]
    EmptyObservation,
    #[error("no training data")]
    NoData,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ergodic,
    LeftToRight,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Ergodic => "ergodic",
            Topology::LeftToRight => "left_to_right",
        })
    }
}

impl FromStr for Topology {
    type Err = HmmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ergodic" => Ok(Topology::Ergodic),
            "left_to_right" => Ok(Topology::LeftToRight),
            other => Err(HmmError::InvalidModel(format!("unknown topology {other:?}"))),
        }
    }
}

/// `ln(sum exp(v))`, exact for all-`-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
