//! Slow, independent reference computations.

use alloc::vec::Vec;
use thiserror::Error;

use crate::exec::Executor;
use crate::model::{ProblemSpec, RateBoxes, RateMatrix};
use crate::pde::{solve_constant_with, Grid, PdeError, SolverSettings};

/// Largest Cartesian product [`brute_force_min`] will evaluate.
pub const MAX_BRUTE_FORCE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("per-box samples must be at least 2, got {0}")]
    Samples(usize),
    #[error("{0} candidate matrices exceed the limit of {MAX_BRUTE_FORCE}; sample more coarsely")]
    TooMany(usize),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

/// Cox-Ross-Rubinstein American put with early exercise at every node.
pub fn binomial_american_put(x0: f64, strike: f64, r: f64, sigma: f64, horizon: f64, steps: usize) -> f64 {
    let steps = steps.max(1);
    let dt = horizon / steps as f64;
    let u = libm::exp(sigma * libm::sqrt(dt));
    let d = 1.0 / u;
    let growth = libm::exp(r * dt);
    let p = (growth - d) / (u - d);
    let disc = 1.0 / growth;
    let mut values: Vec<f64> = (0..=steps)
        .map(|j| (strike - x0 * libm::pow(u, j as f64) * libm::pow(d, (steps - j) as f64)).max(0.0))
        .collect();
    for n in (0..steps).rev() {
        for j in 0..=n {
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            let spot = x0 * libm::pow(u, j as f64) * libm::pow(d, (n - j) as f64);
            values[j] = cont.max(strike - spot);
        }
    }
    values[0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub price: f64,
    pub argmin: RateMatrix,
    /// Every evaluated `(matrix, price)` pair in enumeration order.
    pub evaluated: Vec<(RateMatrix, f64)>,
}

/// Minimum of `v(x0, y0, T; q)` over constant matrices whose rates are
/// `per_box_samples` evenly spaced points (endpoints included) in every box.
/// Ties keep the first matrix in enumeration order.
pub fn brute_force_min<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    grid: &Grid,
    per_box_samples: usize,
    settings: &SolverSettings,
) -> Result<BruteForceResult, OracleError> {
    if per_box_samples < 2 {
        return Err(OracleError::Samples(per_box_samples));
    }
    let size = boxes.grid_size(per_box_samples);
    if size > MAX_BRUTE_FORCE {
        return Err(OracleError::TooMany(size));
    }
    let candidates = boxes.grid_matrices(per_box_samples);
    let prices = exec.map(candidates.len(), |k| {
        solve_constant_with(problem, &candidates[k], grid, settings).map(|s| s.initial_price())
    });
    let mut evaluated = Vec::with_capacity(candidates.len());
    for (q, p) in candidates.into_iter().zip(prices) {
        evaluated.push((q, p?));
    }
    let mut best = 0;
    for (k, (_, p)) in evaluated.iter().enumerate() {
        if *p < evaluated[best].1 {
            best = k;
        }
    }
    Ok(BruteForceResult { price: evaluated[best].1, argmin: evaluated[best].0.clone(), evaluated })
}
