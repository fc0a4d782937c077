use super::rng::StreamSeeds;
use super::sim::{map_paths, Simulator};
use super::strategy::RateStrategy;
use super::McError;
use crate::exec::Executor;
use crate::model::{DiffusionCoef, Dynamics, ProblemSpec};
use crate::stats::Estimate;

/// `((1 + 4 x0^2) e^{8 K^2 t (4 + t)})^{q/2}`.
pub fn growth_bound(x0: f64, k_growth: f64, t: f64, q: f64) -> f64 {
    let base = (1.0 + 4.0 * x0 * x0) * libm::exp(8.0 * k_growth * k_growth * t * (4.0 + t));
    libm::pow(base, q / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentReport {
    pub q: f64,
    pub k_growth: f64,
    pub t: f64,
    /// Estimate of `E[sup_{s <= t} |X_s|^q]` over the monitoring dates.
    pub empirical: Estimate,
    pub bound: f64,
    pub pass: bool,
}

/// Smallest linear-growth constant the coefficients admit.
pub fn growth_constant(problem: &ProblemSpec) -> Result<f64, McError> {
    let s = problem.sigma_max();
    match &problem.dynamics {
        Dynamics::Gbm { mu } => Ok(s.max(mu.abs())),
        Dynamics::Cev { .. } => Err(McError::Unsupported("CEV coefficients grow superlinearly")),
        Dynamics::Driftless { a } => Ok(match a {
            DiffusionCoef::Constant(c) => c.abs() * s,
            DiffusionCoef::Identity => s,
            DiffusionCoef::Table(t) => t.min_value().abs().max(t.max_value().abs()) * s,
        }),
    }
}

/// Compares the simulated moment of the running maximum of `|X|` with the
/// explicit growth bound.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound_check<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    strategy: &RateStrategy,
    k_growth: f64,
    q: f64,
    t: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<MomentReport, McError> {
    let required = growth_constant(problem)?;
    if !(k_growth >= required) {
        return Err(McError::GrowthConstant { given: k_growth, required });
    }
    if n == 0 {
        return Err(McError::NoPaths);
    }
    let mut horizon_problem = problem.clone();
    horizon_problem.horizon = t;
    let sim = Simulator::new(&horizon_problem, strategy, dt)?;
    let seeds = StreamSeeds::from_seed(seed);
    let samples = map_paths(exec, n, |p| {
        let mut sup: f64 = 0.0;
        sim.run_path(&seeds, p, |_, s| {
            sup = sup.max(s.x.abs());
            false
        });
        libm::pow(sup, q)
    });
    let empirical = Estimate::from_samples(&samples);
    let bound = growth_bound(problem.x0, k_growth, t, q);
    Ok(MomentReport { q, k_growth, t, empirical, bound, pass: empirical.mean <= bound })
}
