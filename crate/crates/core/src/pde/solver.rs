use alloc::vec;
use alloc::vec::Vec;

use super::surface::{RateField, ValueSurface};
use super::{Grid, PdeError, Transform};
use crate::extremal::{pointwise_rates_with, TieBreak};
use crate::model::{sigma_monotonicity, validate_rate_matrix, ProblemSpec, RateBoxes, RateMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverSettings {
    /// Time-stepping weight: 0.5 is Crank-Nicolson, 1.0 fully implicit.
    pub theta: f64,
    /// Number of fully implicit start-up steps.
    pub rannacher_steps: usize,
    /// Over-relaxation factor of the projected SOR sweep.
    pub omega: f64,
    /// Stop when the largest nodal update of a sweep is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum projected solves per layer in the worst-case solve.
    pub max_policy_sweeps: usize,
    /// Exercise threshold relative to the payoff scale.
    pub mask_tol_rel: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            theta: 0.5,
            rannacher_steps: 2,
            omega: 1.2,
            tol: 1e-8,
            max_iter: 10_000,
            max_policy_sweeps: 10,
            mask_tol_rel: 1e-9,
        }
    }
}

impl SolverSettings {
    fn mask_tol(&self, problem: &ProblemSpec) -> f64 {
        let scale = problem.payoff.scale();
        if scale > 0.0 {
            self.mask_tol_rel * scale
        } else {
            self.mask_tol_rel
        }
    }
}

/// Three-point spatial operator per regime (diffusion + drift only).
/// Entries at the two boundary nodes are unused.
struct Stencil {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

fn stencil(problem: &ProblemSpec, grid: &Grid) -> Stencil {
    let nx = grid.nx();
    let m = problem.m();
    let xi = grid.coords();
    let xs = grid.x();
    let mut lo = vec![0.0; m * nx];
    let mut di = vec![0.0; m * nx];
    let mut up = vec![0.0; m * nx];
    for (y, &sig) in problem.sigma.iter().enumerate() {
        for i in 1..nx - 1 {
            let hl = xi[i] - xi[i - 1];
            let hr = xi[i + 1] - xi[i];
            let x = xs[i];
            let a = problem.dynamics.diffusion(x);
            let b = problem.dynamics.drift(x);
            let (d, c) = match grid.transform() {
                Transform::Identity => (0.5 * a * a * sig * sig, b),
                Transform::Log => {
                    let dz = 0.5 * a * a * sig * sig / (x * x);
                    (dz, b / x - dz)
                }
            };
            let s = hl + hr;
            let (mut l, mut dd, mut u) = (
                2.0 * d / (hl * s) - c * hr / (hl * s),
                -2.0 * d / (hl * hr) + c * (hr - hl) / (hl * hr),
                2.0 * d / (hr * s) + c * hl / (hr * s),
            );
            if l < 0.0 || u < 0.0 {
                // convection dominated: one-sided first derivative
                let (cl, cd, cu) = if c >= 0.0 { (0.0, -c / hr, c / hr) } else { (-c / hl, c / hl, 0.0) };
                l = 2.0 * d / (hl * s) + cl;
                dd = -2.0 * d / (hl * hr) + cd;
                u = 2.0 * d / (hr * s) + cu;
            }
            let k = y * nx + i;
            lo[k] = l;
            di[k] = dd;
            up[k] = u;
        }
    }
    Stencil { lo, di, up }
}

enum Policy<'a> {
    Constant(&'a RateMatrix),
    Worst { boxes: &'a RateBoxes, tie: TieBreak },
}

struct Marcher<'a> {
    st: Stencil,
    g: Vec<f64>,
    nx: usize,
    m: usize,
    alpha: f64,
    settings: &'a SolverSettings,
}

impl Marcher<'_> {
    /// `(A v)` at interior node `(y, i)` for frozen rates.
    fn apply(&self, v: &[f64], rp: &[f64], rm: &[f64], y: usize, i: usize) -> f64 {
        let nx = self.nx;
        let k = y * nx + i;
        let mut s = self.st.lo[k] * v[k - 1]
            + (self.st.di[k] - self.alpha - rp[k] - rm[k]) * v[k]
            + self.st.up[k] * v[k + 1];
        if y + 1 < self.m {
            s += rp[k] * v[k + nx];
        }
        if y > 0 {
            s += rm[k] * v[k - nx];
        }
        s
    }

    /// Projected SOR for `(I - theta dt A) v = (I + (1 - theta) dt A) prev`,
    /// `v >= g`. `cur` holds the warm start on entry.
    fn solve_layer(
        &self,
        layer: usize,
        prev: &[f64],
        rp: &[f64],
        rm: &[f64],
        theta: f64,
        dt: f64,
        cur: &mut [f64],
    ) -> Result<(), PdeError> {
        let (nx, m) = (self.nx, self.m);
        let mut rhs = vec![0.0; m * nx];
        let mut diag = vec![0.0; m * nx];
        let explicit = (1.0 - theta) * dt;
        let implicit = theta * dt;
        for y in 0..m {
            for i in 1..nx - 1 {
                let k = y * nx + i;
                rhs[k] = if explicit != 0.0 {
                    prev[k] + explicit * self.apply(prev, rp, rm, y, i)
                } else {
                    prev[k]
                };
                diag[k] = 1.0 - implicit * (self.st.di[k] - self.alpha - rp[k] - rm[k]);
            }
            cur[y * nx] = self.g[0];
            cur[y * nx + nx - 1] = self.g[nx - 1];
        }
        let omega = self.settings.omega;
        let mut residual = f64::INFINITY;
        for _ in 0..self.settings.max_iter {
            let mut max_change: f64 = 0.0;
            for y in 0..m {
                for i in 1..nx - 1 {
                    let k = y * nx + i;
                    let mut off = self.st.lo[k] * cur[k - 1] + self.st.up[k] * cur[k + 1];
                    if y + 1 < m {
                        off += rp[k] * cur[k + nx];
                    }
                    if y > 0 {
                        off += rm[k] * cur[k - nx];
                    }
                    let gs = (rhs[k] + implicit * off) / diag[k];
                    let old = cur[k];
                    let new = (old + omega * (gs - old)).max(self.g[i]);
                    max_change = max_change.max((new - old).abs());
                    cur[k] = new;
                }
            }
            residual = max_change;
            if max_change <= self.settings.tol {
                return Ok(());
            }
        }
        Err(PdeError::NonConvergence { layer, residual })
    }

    fn select_rates(&self, v: &[f64], boxes: &RateBoxes, tie: TieBreak, rp: &mut [f64], rm: &mut [f64]) {
        let (nx, m) = (self.nx, self.m);
        for y in 0..m {
            for i in 0..nx {
                let k = y * nx + i;
                let dv_up = if y + 1 < m { v[k + nx] - v[k] } else { 0.0 };
                let dv_down = if y > 0 { v[k - nx] - v[k] } else { 0.0 };
                // differences the projected solve cannot resolve count as ties
                let snap = |d: f64| if d.abs() <= self.settings.tol { 0.0 } else { d };
                let (p, q) = pointwise_rates_with(snap(dv_up), snap(dv_down), y, boxes, tie);
                rp[k] = p;
                rm[k] = q;
            }
        }
    }
}

fn march(
    problem: &ProblemSpec,
    grid: &Grid,
    policy: Policy<'_>,
    settings: &SolverSettings,
) -> Result<(ValueSurface, RateField), PdeError> {
    problem.validate()?;
    let big_t = problem.horizon;
    if (grid.horizon() - big_t).abs() > 1e-12 * big_t.max(1.0) {
        return Err(PdeError::Horizon { grid: grid.horizon(), problem: big_t });
    }
    let m = problem.m();
    match &policy {
        Policy::Constant(q) => {
            if q.m() != m {
                return Err(PdeError::Regimes { expected: m, got: q.m() });
            }
            validate_rate_matrix(q).map_err(PdeError::RateMatrix)?;
        }
        Policy::Worst { boxes, .. } => {
            if boxes.m() != m {
                return Err(PdeError::Regimes { expected: m, got: boxes.m() });
            }
        }
    }

    let nx = grid.nx();
    let nt = grid.nt();
    let layer_len = m * nx;
    let g: Vec<f64> = grid.x().iter().map(|&x| problem.payoff.eval(x)).collect();
    let mask_tol = settings.mask_tol(problem);
    let marcher = Marcher { st: stencil(problem, grid), g, nx, m, alpha: problem.alpha, settings };

    let mut v = vec![0.0; nt * layer_len];
    let mut lp = vec![0.0; nt * layer_len];
    let mut lm = vec![0.0; nt * layer_len];
    for y in 0..m {
        v[y * nx..(y + 1) * nx].copy_from_slice(&marcher.g);
    }

    let mut rp = vec![0.0; layer_len];
    let mut rm = vec![0.0; layer_len];
    match &policy {
        Policy::Constant(q) => {
            for y in 0..m {
                rp[y * nx..(y + 1) * nx].fill(q.up(y));
                rm[y * nx..(y + 1) * nx].fill(q.down(y));
            }
        }
        Policy::Worst { boxes, tie } => marcher.select_rates(&v[..layer_len], boxes, *tie, &mut rp, &mut rm),
    }
    lp[..layer_len].copy_from_slice(&rp);
    lm[..layer_len].copy_from_slice(&rm);

    let dt = grid.dt();
    for n in 1..nt {
        let theta = if n <= settings.rannacher_steps { 1.0 } else { settings.theta };
        let (done, rest) = v.split_at_mut(n * layer_len);
        let prev = &done[(n - 1) * layer_len..];
        let cur = &mut rest[..layer_len];
        cur.copy_from_slice(prev);
        match &policy {
            Policy::Constant(_) => marcher.solve_layer(n, prev, &rp, &rm, theta, dt, cur)?,
            Policy::Worst { boxes, tie } => {
                marcher.select_rates(prev, boxes, *tie, &mut rp, &mut rm);
                let mut next_p = vec![0.0; layer_len];
                let mut next_m = vec![0.0; layer_len];
                let mut stable = false;
                for _ in 0..settings.max_policy_sweeps {
                    marcher.solve_layer(n, prev, &rp, &rm, theta, dt, cur)?;
                    marcher.select_rates(cur, boxes, *tie, &mut next_p, &mut next_m);
                    if next_p == rp && next_m == rm {
                        stable = true;
                        break;
                    }
                    core::mem::swap(&mut rp, &mut next_p);
                    core::mem::swap(&mut rm, &mut next_m);
                }
                if !stable {
                    return Err(PdeError::PolicyNonConvergence { layer: n });
                }
            }
        }
        lp[n * layer_len..(n + 1) * layer_len].copy_from_slice(&rp);
        lm[n * layer_len..(n + 1) * layer_len].copy_from_slice(&rm);
    }

    // where the payoff vanishes, stopping is optimal only if the value does
    let exercise = v
        .chunks(nx)
        .flat_map(|layer| {
            layer.iter().zip(&marcher.g).map(|(&vv, &gg)| if gg > 0.0 { vv - gg < mask_tol } else { vv <= gg })
        })
        .collect();
    let surface = ValueSurface { v, exercise, grid: grid.clone(), problem: problem.clone(), mask_tol };
    let field = RateField { nx, m, nt, lambda_plus: lp, lambda_minus: lm };
    Ok((surface, field))
}

/// Value surface of the optimal stopping problem for a constant rate matrix.
pub fn solve_constant(problem: &ProblemSpec, q: &RateMatrix, grid: &Grid) -> Result<ValueSurface, PdeError> {
    solve_constant_with(problem, q, grid, &SolverSettings::default())
}

pub fn solve_constant_with(
    problem: &ProblemSpec,
    q: &RateMatrix,
    grid: &Grid,
    settings: &SolverSettings,
) -> Result<ValueSurface, PdeError> {
    march(problem, grid, Policy::Constant(q), settings).map(|(s, _)| s)
}

/// Worst-case value over rates in `boxes`, with the rates chosen at every
/// node by the bang-bang rule and stabilised by policy iteration per layer.
///
/// Ties (zero value differences) resolve to the extremal matrix's endpoint
/// when volatility is monotone, and to the infimum otherwise.
pub fn solve_worstcase_hjb(
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    grid: &Grid,
) -> Result<(ValueSurface, RateField), PdeError> {
    solve_worstcase_hjb_with(problem, boxes, grid, &SolverSettings::default())
}

pub fn solve_worstcase_hjb_with(
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    grid: &Grid,
    settings: &SolverSettings,
) -> Result<(ValueSurface, RateField), PdeError> {
    let tie = TieBreak::Extremal(sigma_monotonicity(&problem.sigma));
    march(problem, grid, Policy::Worst { boxes, tie }, settings)
}
