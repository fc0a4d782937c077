use alloc::vec::Vec;

use super::{PdeError, ValueSurface};
use crate::model::PayoffKind;

/// Put exercise boundaries `s*(t, y)`: exercise when `x <= s*`. `NaN` marks
/// layers without an exercise region inside the grid (always at `t = 0`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryCurves {
    t: Vec<f64>,
    /// `s[y][n]`.
    s: Vec<Vec<f64>>,
}

impl BoundaryCurves {
    pub fn new(t: Vec<f64>, s: Vec<Vec<f64>>) -> Self {
        Self { t, s }
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn m(&self) -> usize {
        self.s.len()
    }

    pub fn curve(&self, y: usize) -> &[f64] {
        &self.s[y]
    }

    pub fn at(&self, y: usize, n: usize) -> f64 {
        self.s[y][n]
    }

    /// Boundary at time-to-maturity `u`, linear between layers. Inside the
    /// first step, where layer 0 is undefined, the first defined layer is
    /// used; `u <= 0` gives `NaN`.
    pub fn interpolate(&self, u: f64, y: usize) -> f64 {
        let t = &self.t;
        let s = &self.s[y];
        if !(u > 0.0) {
            return f64::NAN;
        }
        let last = t.len() - 1;
        if u >= t[last] {
            return s[last];
        }
        let k = t.partition_point(|&b| b <= u).max(1);
        let (a, b) = (s[k - 1], s[k]);
        match (a.is_nan(), b.is_nan()) {
            (false, false) => a + (b - a) * (u - t[k - 1]) / (t[k] - t[k - 1]),
            (true, _) => b,
            (false, true) => a,
        }
    }
}

/// Extracts `s*(t, y)` from the exercise mask of a put surface.
///
/// The exercise set is the block of masked nodes contiguous with the lower
/// grid end where the payoff is positive; its edge is refined by linear
/// interpolation of the excess `v - g` to the mask threshold against the
/// first continuation node.
pub fn extract_boundary(surface: &ValueSurface) -> Result<BoundaryCurves, PdeError> {
    let payoff = &surface.problem().payoff;
    if let PayoffKind::Table(_) = payoff.kind {
        return Err(PdeError::UnsupportedPayoff);
    }
    let grid = surface.grid();
    let xs = grid.x();
    let nx = grid.nx();
    let mask_tol = surface.mask_tol();
    let g: Vec<f64> = xs.iter().map(|&x| payoff.eval(x)).collect();
    let mut curves = Vec::with_capacity(surface.m());
    for y in 0..surface.m() {
        let mut curve = Vec::with_capacity(grid.nt());
        for n in 0..grid.nt() {
            if n == 0 {
                curve.push(f64::NAN);
                continue;
            }
            let mask = surface.mask_slice(y, n);
            let v = surface.slice(y, n);
            let mut last = None;
            for i in 0..nx - 1 {
                if mask[i] && g[i] > 0.0 {
                    last = Some(i);
                } else {
                    break;
                }
            }
            let s = match last {
                // only the pinned boundary node: no interior exercise region
                None | Some(0) => f64::NAN,
                Some(i) => {
                    let e0 = v[i] - g[i];
                    let e1 = v[i + 1] - g[i + 1];
                    if e1 > e0 {
                        let w = ((mask_tol - e0) / (e1 - e0)).clamp(0.0, 1.0);
                        xs[i] + w * (xs[i + 1] - xs[i])
                    } else {
                        xs[i]
                    }
                }
            };
            curve.push(s);
        }
        curves.push(curve);
    }
    Ok(BoundaryCurves { t: grid.t().to_vec(), s: curves })
}
