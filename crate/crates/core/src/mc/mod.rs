//! Monte Carlo simulation of the regime-switching pair under adapted rate
//! strategies, stopping-rule pricing, least-squares stopping and the moment
//! bound check.
//!
//! Every path owns two counter-mode streams, one for the Brownian increments
//! and one for the chain, keyed by `(seed, path index)`. Paths can therefore
//! be generated in any order or on any number of threads with bit-identical
//! results.

mod moments;
mod regression;
mod rng;
mod sim;
mod stopping;
mod strategy;

use alloc::vec::Vec;
use thiserror::Error;

use crate::extremal::ExtremalError;
use crate::model::{ModelError, RateViolation};

pub use moments::{growth_bound, growth_constant, moment_bound_check, MomentReport};
pub use regression::{fit_regression_rule, Fit, RegressionRule};
pub use rng::StreamSeeds;
pub use sim::{simulate, simulate_with, PathBatch, PathState, Simulator, FLOOR_WARNING_FRACTION};
pub use stopping::{evaluate_stopped, price, StoppingRule};
pub use strategy::{FeedbackFn, FeedbackRule, RateStrategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Extremal(#[from] ExtremalError),
    #[error("invalid rate matrix: {} violation(s)", .0.len())]
    RateMatrix(Vec<RateViolation>),
    #[error("step {dt} must be positive and at most T/10 = {max}")]
    Step { dt: f64, max: f64 },
    #[error("need at least one path")]
    NoPaths,
    #[error("strategy describes {got} regimes, problem has {expected}")]
    Regimes { expected: usize, got: usize },
    #[error("regression degree must lie in 2..=5, got {0}")]
    Degree(usize),
    #[error("regression needs at least 1000 paths, got {0}")]
    TooFewPaths(usize),
    #[error("degenerate regression matrix at step {step}, regime {}", .regime + 1)]
    DegenerateRegression { step: usize, regime: usize },
    #[error("stopping rule is incompatible with the path grid: {0}")]
    IncompatibleRule(&'static str),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("growth constant {given} is below the required {required}")]
    GrowthConstant { given: f64, required: f64 },
}
