use alloc::vec::Vec;

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::rng::StreamSeeds;
use super::strategy::{RateStrategy, Resolved};
use super::McError;
use crate::exec::{Executor, Sequential};
use crate::model::{Dynamics, ProblemSpec};
use crate::stats::unit_f64;

/// Fraction of floored paths above which a batch carries a warning.
pub const FLOOR_WARNING_FRACTION: f64 = 0.01;

const PATH_BLOCK: usize = 1024;

/// What a feedback strategy or stopping rule may look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    /// 0-based regime.
    pub y: usize,
    /// `max_{s <= t} X_s` over the monitoring dates.
    pub running_max: f64,
}

/// Euler-Maruyama stepper for one problem and one strategy.
#[derive(Debug, Clone)]
pub struct Simulator {
    problem: ProblemSpec,
    rates: Resolved,
    dt: f64,
    n_steps: usize,
    /// CEV truncation level.
    floor: Option<f64>,
    sqrt_dt: f64,
}

impl Simulator {
    /// `dt` is rounded down so that a whole number of steps spans the horizon.
    pub fn new(problem: &ProblemSpec, strategy: &RateStrategy, dt: f64) -> Result<Self, McError> {
        problem.validate()?;
        if strategy.m() != problem.m() {
            return Err(McError::Regimes { expected: problem.m(), got: strategy.m() });
        }
        let max = problem.horizon / 10.0;
        if !(dt > 0.0 && dt <= max * (1.0 + 1e-12)) {
            return Err(McError::Step { dt, max });
        }
        let n_steps = libm::ceil(problem.horizon / dt - 1e-9) as usize;
        let dt = problem.horizon / n_steps as f64;
        let floor = match problem.dynamics {
            Dynamics::Cev { .. } => Some(1e-12 * problem.x0),
            _ => None,
        };
        Ok(Self {
            problem: problem.clone(),
            rates: strategy.resolve(dt)?,
            dt,
            n_steps,
            floor,
            sqrt_dt: libm::sqrt(dt),
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.problem.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// `(up, down)` rates the strategy emits in state `s`.
    pub fn rates_at(&self, s: &PathState) -> (f64, f64) {
        self.rates.rates(s)
    }

    /// Simulates path `path`, calling `visit(k, state)` at every monitoring
    /// date `k = 0..=n_steps`. Returning `true` from `visit` ends the path.
    /// The result reports whether the CEV floor was hit.
    pub fn run_path(&self, seeds: &StreamSeeds, path: u64, visit: impl FnMut(usize, &PathState) -> bool) -> bool {
        let mut diffusion = seeds.diffusion_rng(path);
        let mut chain = seeds.chain_rng(path);
        self.drive(
            || StandardNormal.sample(&mut diffusion),
            || unit_f64(chain.next_u64()),
            visit,
        )
    }

    /// Draws the `n_steps` Gaussian increments and chain uniforms that
    /// [`Simulator::run_path`] would consume for `path`.
    pub fn path_inputs(&self, seeds: &StreamSeeds, path: u64) -> (Vec<f64>, Vec<f64>) {
        let mut diffusion = seeds.diffusion_rng(path);
        let mut chain = seeds.chain_rng(path);
        let z = (0..self.n_steps).map(|_| StandardNormal.sample(&mut diffusion)).collect();
        let u = (0..self.n_steps).map(|_| unit_f64(chain.next_u64())).collect();
        (z, u)
    }

    /// Replays a path from explicit inputs (one normal and one uniform per
    /// step).
    pub fn replay(&self, normals: &[f64], uniforms: &[f64], visit: impl FnMut(usize, &PathState) -> bool) -> bool {
        assert!(normals.len() >= self.n_steps && uniforms.len() >= self.n_steps);
        let mut zi = normals.iter().copied();
        let mut ui = uniforms.iter().copied();
        self.drive(|| zi.next().unwrap_or(0.0), || ui.next().unwrap_or(1.0), visit)
    }

    fn drive(
        &self,
        mut normal: impl FnMut() -> f64,
        mut uniform: impl FnMut() -> f64,
        mut visit: impl FnMut(usize, &PathState) -> bool,
    ) -> bool {
        let p = &self.problem;
        let mut s = PathState { t: 0.0, x: p.x0, y: p.y0, running_max: p.x0 };
        let mut floored = false;
        if visit(0, &s) {
            return floored;
        }
        for k in 1..=self.n_steps {
            let (p_switch, p_up) = self.rates.switch_probabilities(&s, self.dt);
            let z = normal();
            let u = uniform();
            let mut x = s.x
                + p.dynamics.drift(s.x) * self.dt
                + p.dynamics.diffusion(s.x) * p.sigma[s.y] * self.sqrt_dt * z;
            if let Some(floor) = self.floor {
                if !(x >= floor) {
                    x = floor;
                    floored = true;
                }
            }
            if u < p_up {
                s.y += 1;
            } else if u < p_switch {
                s.y -= 1;
            }
            s.x = x;
            s.t = self.time(k);
            if x > s.running_max {
                s.running_max = x;
            }
            if visit(k, &s) {
                break;
            }
        }
        floored
    }
}

/// Simulated paths on the monitoring dates `times`, row-major by path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `x[p * (n_steps + 1) + k]`.
    pub x: Vec<f64>,
    /// 0-based regimes, same layout as `x`.
    pub y: Vec<u16>,
    pub seeds: StreamSeeds,
    pub seed: u64,
    /// Paths on which the CEV floor was applied at least once.
    pub floored_paths: usize,
    pub floor_warning: bool,
}

impl PathBatch {
    pub fn x_path(&self, p: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.x[p * w..(p + 1) * w]
    }

    pub fn y_path(&self, p: usize) -> &[u16] {
        let w = self.n_steps + 1;
        &self.y[p * w..(p + 1) * w]
    }

    pub fn floor_fraction(&self) -> f64 {
        self.floored_paths as f64 / self.n_paths as f64
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.n_steps]
    }
}

/// Simulates `n` full paths on the calling thread.
pub fn simulate(problem: &ProblemSpec, strategy: &RateStrategy, n: usize, dt: f64, seed: u64) -> Result<PathBatch, McError> {
    simulate_with(&Sequential, problem, strategy, n, dt, seed)
}

pub fn simulate_with<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    strategy: &RateStrategy,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<PathBatch, McError> {
    if n == 0 {
        return Err(McError::NoPaths);
    }
    let sim = Simulator::new(problem, strategy, dt)?;
    let seeds = StreamSeeds::from_seed(seed);
    let w = sim.n_steps() + 1;
    let blocks = n.div_ceil(PATH_BLOCK);
    let parts = exec.map(blocks, |b| {
        let start = b * PATH_BLOCK;
        let end = (start + PATH_BLOCK).min(n);
        let mut xs = Vec::with_capacity((end - start) * w);
        let mut ys = Vec::with_capacity((end - start) * w);
        let mut floored = 0usize;
        for p in start..end {
            let hit = sim.run_path(&seeds, p as u64, |_, s| {
                xs.push(s.x);
                ys.push(s.y as u16);
                false
            });
            floored += hit as usize;
        }
        (xs, ys, floored)
    });
    let mut x = Vec::with_capacity(n * w);
    let mut y = Vec::with_capacity(n * w);
    let mut floored_paths = 0;
    for (xs, ys, f) in parts {
        x.extend_from_slice(&xs);
        y.extend_from_slice(&ys);
        floored_paths += f;
    }
    Ok(PathBatch {
        n_paths: n,
        n_steps: sim.n_steps(),
        dt: sim.dt(),
        times: sim.times(),
        x,
        y,
        seeds,
        seed,
        floored_paths,
        floor_warning: floored_paths as f64 > FLOOR_WARNING_FRACTION * n as f64,
    })
}

/// Runs `f` on every path index in fixed-size blocks and returns the
/// results in path order.
pub(crate) fn map_paths<E, T, F>(exec: &E, n: usize, f: F) -> Vec<T>
where
    E: Executor,
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let blocks = n.div_ceil(PATH_BLOCK);
    let parts = exec.map(blocks, |b| {
        let start = b * PATH_BLOCK;
        let end = (start + PATH_BLOCK).min(n);
        (start..end).map(|p| f(p as u64)).collect::<Vec<T>>()
    });
    parts.into_iter().flatten().collect()
}
