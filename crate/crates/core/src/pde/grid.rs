use alloc::vec::Vec;

use super::PdeError;
use crate::model::{Dynamics, ProblemSpec};

/// Coordinate in which the spatial derivatives are discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Transform {
    Identity,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    x: Vec<f64>,
    t: Vec<f64>,
    transform: Transform,
}

impl Grid {
    pub fn new(x: Vec<f64>, t: Vec<f64>, transform: Transform) -> Result<Self, PdeError> {
        if x.len() < 3 {
            return Err(PdeError::TooFewSpaceNodes(x.len()));
        }
        if t.len() < 2 {
            return Err(PdeError::TooFewTimeNodes(t.len()));
        }
        if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PdeError::SpaceNodes);
        }
        if transform == Transform::Log && x[0] <= 0.0 {
            return Err(PdeError::LogTransform);
        }
        let dt = t[1] - t[0];
        let uniform = t.windows(2).all(|w| {
            let d = w[1] - w[0];
            d > 0.0 && (d - dt).abs() <= 1e-9 * dt.max(1.0)
        });
        if t[0] != 0.0 || !uniform {
            return Err(PdeError::TimeNodes);
        }
        Ok(Self { x, t, transform })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn horizon(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Index of a node exactly equal to `x`.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.x.iter().position(|&v| v == x)
    }

    pub(crate) fn coords(&self) -> Vec<f64> {
        match self.transform {
            Transform::Identity => self.x.clone(),
            Transform::Log => self.x.iter().map(|&v| libm::log(v)).collect(),
        }
    }
}

/// Nodes on `[lo, hi]` with `center` an exact node: `c = (n-1)/2` uniform
/// intervals to the left and the rest to the right.
fn anchored_nodes(lo: f64, center: f64, hi: f64, n: usize) -> Vec<f64> {
    let left = (n - 1) / 2;
    let right = n - 1 - left;
    let hl = (center - lo) / left as f64;
    let hr = (hi - center) / right as f64;
    (0..n)
        .map(|i| {
            if i < left {
                lo + hl * i as f64
            } else if i == left {
                center
            } else if i == n - 1 {
                hi
            } else {
                center + hr * (i - left) as f64
            }
        })
        .collect()
}

/// Grid around `x0` sized by the largest regime volatility over the horizon.
///
/// GBM: log-spaced on `x0 * exp(+-w)`, `w = width_mult * sigma_max * sqrt(T)`.
/// CEV: linearly spaced on the same range. Driftless: linear on
/// `x0 +- width_mult * a(x0) * sigma_max * sqrt(T)`. `nt` counts time nodes.
pub fn build_grid(problem: &ProblemSpec, nx: usize, nt: usize, width_mult: f64) -> Result<Grid, PdeError> {
    problem.validate()?;
    if nx < 3 {
        return Err(PdeError::TooFewSpaceNodes(nx));
    }
    if nt < 2 {
        return Err(PdeError::TooFewTimeNodes(nt));
    }
    if !(width_mult.is_finite() && width_mult > 0.0) {
        return Err(PdeError::Width(width_mult));
    }
    let x0 = problem.x0;
    let big_t = problem.horizon;
    let spread = width_mult * problem.sigma_max() * libm::sqrt(big_t);
    let (x, transform) = match &problem.dynamics {
        Dynamics::Gbm { .. } => {
            let z0 = libm::log(x0);
            let mut x: Vec<f64> =
                anchored_nodes(z0 - spread, z0, z0 + spread, nx).into_iter().map(libm::exp).collect();
            x[(nx - 1) / 2] = x0;
            (x, Transform::Log)
        }
        Dynamics::Cev { .. } => {
            let lo = x0 * libm::exp(-spread);
            let hi = x0 * libm::exp(spread);
            if !(lo > 0.0) {
                return Err(PdeError::CevLowerEnd(lo));
            }
            (anchored_nodes(lo, x0, hi, nx), Transform::Identity)
        }
        Dynamics::Driftless { a } => {
            let half = spread * a.eval(x0);
            (anchored_nodes(x0 - half, x0, x0 + half, nx), Transform::Identity)
        }
    };
    let steps = nt - 1;
    let t = (0..nt)
        .map(|n| if n == steps { big_t } else { big_t * n as f64 / steps as f64 })
        .collect();
    Grid::new(x, t, transform)
}
