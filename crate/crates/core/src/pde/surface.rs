use alloc::vec::Vec;

use super::{Grid, PdeError};
use crate::model::{ProblemSpec, RateMatrix};

/// Tolerance for the obstacle and time-monotonicity invariants.
pub const INVARIANT_TOL: f64 = 1e-10;

/// Value function on a space x regime x time grid.
///
/// Storage is time-major: entry `(i, y, n)` lives at `(n * m + y) * nx + i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValueSurface {
    pub(crate) v: Vec<f64>,
    pub(crate) exercise: Vec<bool>,
    pub(crate) grid: Grid,
    pub(crate) problem: ProblemSpec,
    pub(crate) mask_tol: f64,
}

impl ValueSurface {
    /// Threshold on `v - g` below which a node counts as exercised.
    pub fn mask_tol(&self) -> f64 {
        self.mask_tol
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    fn idx(&self, i: usize, y: usize, n: usize) -> usize {
        (n * self.m() + y) * self.grid.nx() + i
    }

    pub fn value(&self, i: usize, y: usize, n: usize) -> f64 {
        self.v[self.idx(i, y, n)]
    }

    pub fn exercised(&self, i: usize, y: usize, n: usize) -> bool {
        self.exercise[self.idx(i, y, n)]
    }

    /// Values of regime `y` on layer `n`, indexed by space node.
    pub fn slice(&self, y: usize, n: usize) -> &[f64] {
        let s = self.idx(0, y, n);
        &self.v[s..s + self.grid.nx()]
    }

    pub fn mask_slice(&self, y: usize, n: usize) -> &[bool] {
        let s = self.idx(0, y, n);
        &self.exercise[s..s + self.grid.nx()]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    /// Linear interpolation in space on layer `n` (flat outside the grid).
    pub fn value_at(&self, x: f64, y: usize, n: usize) -> f64 {
        let xs = self.grid.x();
        let vs = self.slice(y, n);
        if x <= xs[0] {
            return vs[0];
        }
        let last = xs.len() - 1;
        if x >= xs[last] {
            return vs[last];
        }
        let k = xs.partition_point(|&b| b <= x);
        let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        vs[k - 1] + w * (vs[k] - vs[k - 1])
    }

    /// Value at `(x0, y, T)`.
    pub fn price(&self, y: usize) -> f64 {
        self.value_at(self.problem.x0, y, self.grid.nt() - 1)
    }

    /// Value at `(x0, y0, T)`.
    pub fn initial_price(&self) -> f64 {
        self.price(self.problem.y0)
    }

    /// Obstacle, initial-condition and time-monotonicity margins.
    pub fn invariants(&self) -> InvariantReport {
        let nx = self.grid.nx();
        let m = self.m();
        let g: Vec<f64> = self.grid.x().iter().map(|&x| self.problem.payoff.eval(x)).collect();
        let mut min_excess = f64::INFINITY;
        let mut max_initial_dev: f64 = 0.0;
        let mut min_time_increment = f64::INFINITY;
        for n in 0..self.grid.nt() {
            for y in 0..m {
                let layer = self.slice(y, n);
                for i in 0..nx {
                    min_excess = min_excess.min(layer[i] - g[i]);
                    if n == 0 {
                        max_initial_dev = max_initial_dev.max((layer[i] - g[i]).abs());
                    } else {
                        let prev = self.slice(y, n - 1);
                        min_time_increment = min_time_increment.min(layer[i] - prev[i]);
                    }
                }
            }
        }
        InvariantReport { min_excess, max_initial_dev, min_time_increment }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvariantReport {
    /// `min (v - g)` over all nodes.
    pub min_excess: f64,
    /// `max |v(., ., 0) - g|`.
    pub max_initial_dev: f64,
    /// `min (v(n) - v(n-1))` over all nodes.
    pub min_time_increment: f64,
}

impl InvariantReport {
    pub fn obstacle_ok(&self) -> bool {
        self.min_excess >= -INVARIANT_TOL
    }

    pub fn initial_ok(&self) -> bool {
        self.max_initial_dev == 0.0
    }

    pub fn time_monotone_ok(&self) -> bool {
        self.min_time_increment >= -INVARIANT_TOL
    }

    pub fn all_ok(&self) -> bool {
        self.obstacle_ok() && self.initial_ok() && self.time_monotone_ok()
    }
}

/// Rates chosen at every node, same layout as [`ValueSurface`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateField {
    pub(crate) nx: usize,
    pub(crate) m: usize,
    pub(crate) nt: usize,
    pub(crate) lambda_plus: Vec<f64>,
    pub(crate) lambda_minus: Vec<f64>,
}

impl RateField {
    pub fn lambda_plus(&self, i: usize, y: usize, n: usize) -> f64 {
        self.lambda_plus[(n * self.m + y) * self.nx + i]
    }

    pub fn lambda_minus(&self, i: usize, y: usize, n: usize) -> f64 {
        self.lambda_minus[(n * self.m + y) * self.nx + i]
    }

    /// True when each regime uses one up-rate and one down-rate at every
    /// node and layer.
    pub fn is_constant(&self) -> bool {
        (0..self.m).all(|y| {
            let p0 = self.lambda_plus(0, y, 0);
            let m0 = self.lambda_minus(0, y, 0);
            (0..self.nt).all(|n| {
                (0..self.nx).all(|i| self.lambda_plus(i, y, n) == p0 && self.lambda_minus(i, y, n) == m0)
            })
        })
    }

    /// True when every node uses exactly the off-diagonal rates of `q`.
    pub fn matches(&self, q: &RateMatrix) -> bool {
        q.m() == self.m
            && (0..self.m).all(|y| {
                (0..self.nt).all(|n| {
                    (0..self.nx).all(|i| {
                        self.lambda_plus(i, y, n) == q.up(y) && self.lambda_minus(i, y, n) == q.down(y)
                    })
                })
            })
    }

    /// Number of nodes whose rates differ from `q`.
    pub fn count_mismatches(&self, q: &RateMatrix) -> usize {
        let mut count = 0;
        for n in 0..self.nt {
            for y in 0..self.m {
                for i in 0..self.nx {
                    if self.lambda_plus(i, y, n) != q.up(y) || self.lambda_minus(i, y, n) != q.down(y) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Largest nodewise absolute difference of two surfaces on the same grid.
pub fn surface_sup_diff(a: &ValueSurface, b: &ValueSurface) -> Result<f64, PdeError> {
    if a.m() != b.m() || a.grid.nx() != b.grid.nx() || a.grid.nt() != b.grid.nt() {
        return Err(PdeError::ShapeMismatch);
    }
    Ok(a.v.iter().zip(&b.v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
}

/// Largest violation of regime ordering: with `increasing`, the maximum of
/// `v(x, y, t) - v(x, y + 1, t)` over all nodes (reversed otherwise).
/// Non-positive means the ordering holds exactly.
pub fn regime_order_violation(s: &ValueSurface, increasing: bool) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for n in 0..s.grid.nt() {
        for y in 0..s.m().saturating_sub(1) {
            let lo = s.slice(y, n);
            let hi = s.slice(y + 1, n);
            for i in 0..s.grid.nx() {
                let d = if increasing { lo[i] - hi[i] } else { hi[i] - lo[i] };
                worst = worst.max(d);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dynamics, PayoffSpec};
    use crate::pde::{build_grid, solve_constant};

    fn surface() -> ValueSurface {
        let p = ProblemSpec {
            dynamics: Dynamics::Gbm { mu: 0.05 },
            sigma: alloc::vec![0.2],
            payoff: PayoffSpec::put(100.0),
            horizon: 1.0,
            alpha: 0.05,
            x0: 100.0,
            y0: 0,
        };
        let g = build_grid(&p, 21, 6, 5.0).unwrap();
        solve_constant(&p, &RateMatrix::zero(1), &g).unwrap()
    }

    #[test]
    fn sup_diff_of_identical_and_shifted_surfaces() {
        let a = surface();
        assert_eq!(surface_sup_diff(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.v.iter_mut().for_each(|v| *v += 0.5);
        assert_eq!(surface_sup_diff(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn interpolation_hits_nodes_and_extends_flat() {
        let s = surface();
        let xs = s.grid().x().to_vec();
        let n = s.grid().nt() - 1;
        assert_eq!(s.value_at(xs[7], 0, n), s.value(7, 0, n));
        assert_eq!(s.value_at(xs[0] / 2.0, 0, n), s.value(0, 0, n));
        assert_eq!(s.initial_price(), s.value(10, 0, n));
    }
}
