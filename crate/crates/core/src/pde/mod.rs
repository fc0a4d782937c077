//! Finite-difference solution of the obstacle problem for a constant rate
//! matrix, of the worst-case HJB variational inequality, and extraction of
//! put exercise boundaries.
//!
//! Time is measured as time-to-maturity: layer 0 is the payoff and the last
//! layer is the value at the full horizon.

mod boundary;
mod grid;
mod solver;
mod surface;

use thiserror::Error;

use crate::model::{ModelError, RateViolation};

pub use boundary::{extract_boundary, BoundaryCurves};
pub use grid::{build_grid, Grid, Transform};
pub use solver::{
    solve_constant, solve_constant_with, solve_worstcase_hjb, solve_worstcase_hjb_with,
    SolverSettings,
};
pub use surface::{
    regime_order_violation, surface_sup_diff, InvariantReport, RateField, ValueSurface,
    INVARIANT_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("grid needs at least 3 space nodes, got {0}")]
    TooFewSpaceNodes(usize),
    #[error("grid needs at least 2 time nodes, got {0}")]
    TooFewTimeNodes(usize),
    #[error("width multiplier must be positive, got {0}")]
    Width(f64),
    #[error("space nodes must be finite and strictly increasing")]
    SpaceNodes,
    #[error("time nodes must be uniform, start at 0 and be strictly increasing")]
    TimeNodes,
    #[error("log transform requires positive space nodes")]
    LogTransform,
    #[error("CEV grid lower end {0} is not positive")]
    CevLowerEnd(f64),
    #[error("grid horizon {grid} does not match problem horizon {problem}")]
    Horizon { grid: f64, problem: f64 },
    #[error("invalid rate matrix: {} violation(s)", .0.len())]
    RateMatrix(alloc::vec::Vec<RateViolation>),
    #[error("rate data describes {got} regimes, problem has {expected}")]
    Regimes { expected: usize, got: usize },
    #[error("projected solve did not converge on layer {layer}: last update {residual:e}")]
    NonConvergence { layer: usize, residual: f64 },
    #[error("policy iteration did not stabilise on layer {layer}")]
    PolicyNonConvergence { layer: usize },
    #[error("exercise boundary extraction supports the put payoff only")]
    UnsupportedPayoff,
    #[error("surfaces have different shapes")]
    ShapeMismatch,
}
