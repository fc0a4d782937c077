use alloc::vec::Vec;

use super::regression::RegressionRule;
use super::rng::StreamSeeds;
use super::sim::{map_paths, PathBatch, PathState, Simulator};
use super::strategy::RateStrategy;
use super::McError;
use crate::exec::Executor;
use crate::model::{PayoffSpec, ProblemSpec};
use crate::pde::BoundaryCurves;
use crate::stats::Estimate;

/// A stopping time on the monitoring dates. Every rule stops at maturity at
/// the latest.
#[derive(Debug, Clone, PartialEq)]
pub enum StoppingRule {
    Immediate,
    AtMaturity,
    /// Stop once `x <= s*(T - t, y)`.
    Boundary(BoundaryCurves),
    Regression(RegressionRule),
}

impl StoppingRule {
    pub fn describe(&self) -> &'static str {
        match self {
            StoppingRule::Immediate => "immediate",
            StoppingRule::AtMaturity => "at-maturity",
            StoppingRule::Boundary(_) => "pde-boundary",
            StoppingRule::Regression(_) => "regression",
        }
    }

    pub(crate) fn prepare(&self, times: &[f64], payoff: &PayoffSpec) -> Result<Prepared<'_>, McError> {
        let n_steps = times.len() - 1;
        let horizon = times[n_steps];
        Ok(match self {
            StoppingRule::Immediate => Prepared::Immediate,
            StoppingRule::AtMaturity => Prepared::AtMaturity,
            StoppingRule::Boundary(curves) => {
                let bt = curves.times();
                let last = *bt.last().ok_or(McError::IncompatibleRule("empty boundary"))?;
                if (last - horizon).abs() > 1e-9 * horizon {
                    return Err(McError::IncompatibleRule("boundary horizon differs from the path horizon"));
                }
                let levels = (0..curves.m())
                    .map(|y| times.iter().map(|&t| curves.interpolate(horizon - t, y)).collect())
                    .collect();
                Prepared::Boundary(levels)
            }
            StoppingRule::Regression(rule) => {
                if rule.n_steps() != n_steps || (rule.dt() * n_steps as f64 - horizon).abs() > 1e-9 * horizon {
                    return Err(McError::IncompatibleRule("regression rule was fitted on a different time grid"));
                }
                Prepared::Regression(rule, payoff.clone())
            }
        })
    }
}

pub(crate) enum Prepared<'a> {
    Immediate,
    AtMaturity,
    /// `levels[y][k]`, `NaN` where no exercise region exists.
    Boundary(Vec<Vec<f64>>),
    Regression(&'a RegressionRule, PayoffSpec),
}

impl Prepared<'_> {
    /// Stop decision at date `k` of `n_steps`.
    pub fn stops(&self, k: usize, n_steps: usize, x: f64, y: usize) -> bool {
        if k == n_steps {
            return true;
        }
        match self {
            Prepared::Immediate => true,
            Prepared::AtMaturity => false,
            Prepared::Boundary(levels) => x <= levels[y][k],
            Prepared::Regression(rule, payoff) => rule.stops(k, x, y, payoff.eval(x)),
        }
    }
}

/// Mean of `e^{-alpha tau} g(X_tau)` over the batch.
pub fn price(paths: &PathBatch, rule: &StoppingRule, alpha: f64, payoff: &PayoffSpec) -> Result<Estimate, McError> {
    let prepared = rule.prepare(&paths.times, payoff)?;
    let n = paths.n_steps;
    let samples: Vec<f64> = (0..paths.n_paths)
        .map(|p| {
            let xs = paths.x_path(p);
            let ys = paths.y_path(p);
            let k = (0..=n).find(|&k| prepared.stops(k, n, xs[k], ys[k] as usize)).unwrap_or(n);
            discounted(alpha, paths.times[k], payoff.eval(xs[k]))
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}

fn discounted(alpha: f64, t: f64, g: f64) -> f64 {
    if alpha == 0.0 || t == 0.0 {
        g
    } else {
        libm::exp(-alpha * t) * g
    }
}

/// Same value as `price(simulate(..), rule, ..)` but stops every path as it
/// is generated, so no batch is held in memory.
pub fn evaluate_stopped<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    strategy: &RateStrategy,
    rule: &StoppingRule,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<Estimate, McError> {
    if n == 0 {
        return Err(McError::NoPaths);
    }
    let sim = Simulator::new(problem, strategy, dt)?;
    let times = sim.times();
    let prepared = rule.prepare(&times, &problem.payoff)?;
    let seeds = StreamSeeds::from_seed(seed);
    let n_steps = sim.n_steps();
    let samples = map_paths(exec, n, |p| {
        let mut out = 0.0;
        sim.run_path(&seeds, p, |k, s: &PathState| {
            if prepared.stops(k, n_steps, s.x, s.y) {
                out = discounted(problem.alpha, times[k], problem.payoff.eval(s.x));
                true
            } else {
                false
            }
        });
        out
    });
    Ok(Estimate::from_samples(&samples))
}
