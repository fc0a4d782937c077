//! Statistical check of the saddle point of the stopper-versus-nature game.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::exec::Executor;
use crate::extremal::{extremal_matrix, ExtremalError};
use crate::mc::{evaluate_stopped, fit_regression_rule, simulate_with, FeedbackRule, McError, RateStrategy, StoppingRule, StreamSeeds};
use crate::model::{sigma_monotonicity, Monotonicity, ProblemSpec, RateBoxes};
use crate::pde::{build_grid, extract_boundary, solve_constant_with, PdeError, SolverSettings};
use crate::stats::Estimate;

/// Width of the statistical acceptance band in standard errors.
pub const SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("volatility must be strictly monotone in the regime index for a saddle candidate")]
    NonMonotone,
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

impl From<ExtremalError> for GameError {
    fn from(_: ExtremalError) -> Self {
        GameError::NonMonotone
    }
}

/// `J(pi, tau)`: value of stopping with `rule` while the chain follows
/// `strategy`.
pub fn evaluate_j<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    strategy: &RateStrategy,
    rule: &StoppingRule,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<Estimate, GameError> {
    Ok(evaluate_stopped(exec, problem, strategy, rule, n, dt, seed)?)
}

/// Discretisation and sampling parameters of a saddle check.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleConfig {
    pub nx: usize,
    pub nt: usize,
    pub width_mult: f64,
    pub settings: SolverSettings,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

/// A stopping rule or rate strategy tried against the candidate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Challenger {
    pub description: String,
    pub estimate: Estimate,
    /// `challenger - center`.
    pub margin: f64,
    /// Allowed deviation of the margin in the unfavourable direction.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SaddleReport {
    pub candidate: String,
    pub center: Estimate,
    pub pde_value: f64,
    /// `|v(nx, nt) - v(nx/2, nt/2)|` at the initial point.
    pub grid_bias: f64,
    pub pde_consistent: bool,
    /// Stopping rules against the candidate strategy; margins should be `<= 0`.
    pub left: Vec<Challenger>,
    /// Strategies against the candidate rule; margins should be `>= 0`.
    pub right: Vec<Challenger>,
    pub left_pass: bool,
    pub right_pass: bool,
}

impl SaddleReport {
    pub fn pass(&self) -> bool {
        self.left_pass && self.right_pass && self.pde_consistent
    }
}

fn candidate_mono(problem: &ProblemSpec) -> Result<Monotonicity, GameError> {
    match sigma_monotonicity(&problem.sigma) {
        Monotonicity::NonMonotone => Err(GameError::NonMonotone),
        mono => Ok(mono),
    }
}

/// Immediate stopping, stopping at maturity and a least-squares best
/// response to the extremal strategy fitted on an independent batch.
pub fn default_left_rules<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    cfg: &SaddleConfig,
) -> Result<Vec<StoppingRule>, GameError> {
    let q = extremal_matrix(boxes, candidate_mono(problem)?)?;
    let fit_paths = cfg.n_paths.clamp(1000, 50_000);
    let batch = simulate_with(
        exec,
        problem,
        &RateStrategy::Constant(q),
        fit_paths,
        cfg.dt,
        StreamSeeds::derive(cfg.seed, 0xf17),
    )?;
    let regression = fit_regression_rule(&batch, problem.alpha, &problem.payoff, 3)?;
    Ok(alloc::vec![StoppingRule::Immediate, StoppingRule::AtMaturity, regression])
}

/// Five uniformly drawn constant matrices, two feedback strategies and the
/// opposite-extremal matrix.
pub fn default_right_strategies(problem: &ProblemSpec, boxes: &RateBoxes, seed: u64) -> Result<Vec<RateStrategy>, GameError> {
    let mono = candidate_mono(problem)?;
    let mut out: Vec<RateStrategy> = (0..5)
        .map(|k| RateStrategy::RandomAdmissible { boxes: boxes.clone(), seed: StreamSeeds::derive(seed, 0x2000 + k) })
        .collect();
    out.push(RateStrategy::Feedback {
        boxes: boxes.clone(),
        rule: FeedbackRule::BelowLevel { pivot: problem.x0, mono },
    });
    out.push(RateStrategy::Feedback {
        boxes: boxes.clone(),
        rule: FeedbackRule::Drawdown { fraction: 0.9, mono },
    });
    out.push(RateStrategy::Constant(extremal_matrix(boxes, mono.opposite())?));
    Ok(out)
}

/// Estimates the candidate value and every challenger on its own seed and
/// checks both sides of the saddle inequality at [`SIGMAS`] standard errors.
pub fn saddle_check<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    left_rules: &[StoppingRule],
    right_strategies: &[RateStrategy],
    cfg: &SaddleConfig,
) -> Result<SaddleReport, GameError> {
    let mono = candidate_mono(problem)?;
    let q = extremal_matrix(boxes, mono)?;
    let grid = build_grid(problem, cfg.nx, cfg.nt, cfg.width_mult)?;
    let surface = solve_constant_with(problem, &q, &grid, &cfg.settings)?;
    let coarse = build_grid(problem, cfg.nx / 2, cfg.nt / 2, cfg.width_mult)?;
    let pde_value = surface.initial_price();
    let grid_bias = (pde_value - solve_constant_with(problem, &q, &coarse, &cfg.settings)?.initial_price()).abs();
    let tau_hat = StoppingRule::Boundary(extract_boundary(&surface)?);
    let pi_hat = RateStrategy::Constant(q);

    let j = |strategy: &RateStrategy, rule: &StoppingRule, k: u64| {
        evaluate_j(exec, problem, strategy, rule, cfg.n_paths, cfg.dt, StreamSeeds::derive(cfg.seed, k))
    };
    let center = j(&pi_hat, &tau_hat, 0)?;
    let pde_consistent = (center.mean - pde_value).abs() <= SIGMAS * center.std_error + grid_bias;

    let mut left = Vec::with_capacity(left_rules.len());
    for (i, rule) in left_rules.iter().enumerate() {
        let estimate = j(&pi_hat, rule, 0x100 + i as u64)?;
        let margin = estimate.mean - center.mean;
        let tolerance = SIGMAS * estimate.combined_se(&center);
        left.push(Challenger {
            description: rule.describe().to_string(),
            estimate,
            margin,
            tolerance,
            pass: margin <= tolerance,
        });
    }
    let mut right = Vec::with_capacity(right_strategies.len());
    for (i, strategy) in right_strategies.iter().enumerate() {
        let estimate = j(strategy, &tau_hat, 0x1000 + i as u64)?;
        let margin = estimate.mean - center.mean;
        let tolerance = SIGMAS * estimate.combined_se(&center) + grid_bias;
        right.push(Challenger {
            description: strategy.describe(),
            estimate,
            margin,
            tolerance,
            pass: margin >= -tolerance,
        });
    }
    Ok(SaddleReport {
        candidate: pi_hat.describe(),
        center,
        pde_value,
        grid_bias,
        pde_consistent,
        left_pass: left.iter().all(|c| c.pass),
        right_pass: right.iter().all(|c| c.pass),
        left,
        right,
    })
}
