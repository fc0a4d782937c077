//! Worst-case values of American-style options on regime-switching diffusions
//! whose transition rates are only known to lie in compact intervals.
//!
//! The crate is `no_std` (with `alloc`). It contains the model types, the
//! extremal rate matrix and bang-bang rate selector, a finite-difference
//! solver for the free-boundary system and the worst-case HJB inequality,
//! Monte Carlo simulation with adapted rate strategies, a saddle-point
//! check for the associated zero-sum game, and independent reference
//! oracles. IO, configuration files and the command-line front end live in
//! the companion `worstcase` crate.
#![no_std]

extern crate alloc;

pub mod exec;
pub mod extremal;
pub mod game;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod pde;
pub mod stats;

pub use extremal::{extremal_matrix, pointwise_rates, pointwise_rates_with, ExtremalError, TieBreak};
pub use model::{
    is_admissible, sigma_monotonicity, validate_rate_matrix, DiffusionCoef, Dynamics, Interval,
    ModelError, Monotonicity, PayoffKind, PayoffSpec, PiecewiseLinear, ProblemSpec, RateBoxes,
    RateMatrix, RateViolation,
};
