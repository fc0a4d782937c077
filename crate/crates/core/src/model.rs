//! Domain types for the regime-switching stopping problem.
//!
//! Regimes are indexed `0..m` in code; human-facing output (violation
//! reports, CSV files, configuration) uses the `1..=m` labels.

use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use thiserror::Error;

/// Row-sum tolerance for a conservative Q-matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("regime count must be at least 1")]
    NoRegimes,
    #[error("sigma[{regime}] = {value} must be positive and finite")]
    Sigma { regime: usize, value: f64 },
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("discount rate must be non-negative, got {0}")]
    Alpha(f64),
    #[error("initial regime {y0} out of range for {m} regimes")]
    InitialRegime { y0: usize, m: usize },
    #[error("initial level must be positive for GBM/CEV dynamics, got {0}")]
    InitialLevel(f64),
    #[error("CEV exponent must exceed 1, got {0}")]
    CevGamma(f64),
    #[error("diffusion coefficient must be positive: {0}")]
    Diffusion(&'static str),
    #[error("invalid payoff: {0}")]
    Payoff(&'static str),
    #[error("invalid piecewise-linear table: {0}")]
    Table(&'static str),
    #[error("invalid interval [{lo}, {hi}]: need 0 < lo <= hi < inf")]
    Interval { lo: f64, hi: f64 },
    #[error("rate boxes need {expected} intervals per direction, got plus={plus}, minus={minus}")]
    BoxCount { expected: usize, plus: usize, minus: usize },
    #[error("rate matrix must be square: {len} entries for m = {m}")]
    NotSquare { m: usize, len: usize },
    #[error("dimension mismatch: matrix has {matrix} regimes, boxes describe {boxes}")]
    DimensionMismatch { matrix: usize, boxes: usize },
}

/// Continuous piecewise-linear function given by sorted breakpoints,
/// extended flat beyond the outermost breakpoints.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, ModelError> {
        if xs.is_empty() {
            return Err(ModelError::Table("no breakpoints"));
        }
        if xs.len() != ys.len() {
            return Err(ModelError::Table("breakpoints and values differ in length"));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::Table("non-finite entry"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::Table("breakpoints must be strictly increasing"));
        }
        Ok(Self { xs, ys })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, ModelError> {
        Self::new(points.iter().map(|p| p.0).collect(), points.iter().map(|p| p.1).collect())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // first index with xs[k] > x; k >= 1 and k <= n-1 here
        let k = self.xs.partition_point(|&b| b <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The state-dependent factor `a(x)` multiplying the regime volatility for
/// driftless dynamics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DiffusionCoef {
    Constant(f64),
    /// `a(x) = x`.
    Identity,
    Table(PiecewiseLinear),
}

impl DiffusionCoef {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DiffusionCoef::Constant(c) => *c,
            DiffusionCoef::Identity => x,
            DiffusionCoef::Table(t) => t.eval(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dynamics {
    /// `dX = a(X) sigma(Y) dB`.
    Driftless { a: DiffusionCoef },
    /// `dX = mu X dt + X sigma(Y) dB`.
    Gbm { mu: f64 },
    /// `dX = X^gamma sigma(Y) dB` with `gamma > 1`.
    Cev { gamma: f64 },
}

impl Dynamics {
    /// State factor of the diffusion coefficient, `a(x)`.
    pub fn diffusion(&self, x: f64) -> f64 {
        match self {
            Dynamics::Driftless { a } => a.eval(x),
            Dynamics::Gbm { .. } => x,
            Dynamics::Cev { gamma } => {
                if x > 0.0 {
                    libm::pow(x, *gamma)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn drift(&self, x: f64) -> f64 {
        match self {
            Dynamics::Gbm { mu } => mu * x,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PayoffKind {
    Put { strike: f64 },
    Table(PiecewiseLinear),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    /// Declared Hölder exponent of the payoff. Metadata only.
    pub holder_beta: f64,
}

impl PayoffSpec {
    pub fn put(strike: f64) -> Self {
        Self { kind: PayoffKind::Put { strike }, holder_beta: 1.0 }
    }

    pub fn table(table: PiecewiseLinear) -> Self {
        Self { kind: PayoffKind::Table(table), holder_beta: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            PayoffKind::Put { strike } => (strike - x).max(0.0),
            PayoffKind::Table(t) => t.eval(x),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self.kind {
            PayoffKind::Put { strike } => Some(strike),
            PayoffKind::Table(_) => None,
        }
    }

    /// Reference magnitude used to scale exercise-detection thresholds.
    pub fn scale(&self) -> f64 {
        match &self.kind {
            PayoffKind::Put { strike } => *strike,
            PayoffKind::Table(t) => t.max_value(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.holder_beta > 0.0 && self.holder_beta <= 1.0) {
            return Err(ModelError::Payoff("holder_beta must lie in (0, 1]"));
        }
        match &self.kind {
            PayoffKind::Put { strike } => {
                if !(strike.is_finite() && *strike > 0.0) {
                    return Err(ModelError::Payoff("strike must be positive"));
                }
            }
            PayoffKind::Table(t) => {
                if t.min_value() < 0.0 {
                    return Err(ModelError::Payoff("table values must be non-negative"));
                }
            }
        }
        Ok(())
    }
}

/// Full pricing problem. `y0` is a 0-based regime index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemSpec {
    pub dynamics: Dynamics,
    pub sigma: Vec<f64>,
    pub payoff: PayoffSpec,
    pub horizon: f64,
    pub alpha: f64,
    pub x0: f64,
    pub y0: usize,
}

impl ProblemSpec {
    pub fn m(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let m = self.m();
        if m == 0 {
            return Err(ModelError::NoRegimes);
        }
        for (regime, &value) in self.sigma.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::Sigma { regime, value });
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ModelError::Horizon(self.horizon));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ModelError::Alpha(self.alpha));
        }
        if self.y0 >= m {
            return Err(ModelError::InitialRegime { y0: self.y0, m });
        }
        if !self.x0.is_finite() {
            return Err(ModelError::InitialLevel(self.x0));
        }
        match &self.dynamics {
            Dynamics::Gbm { mu } => {
                if !mu.is_finite() {
                    return Err(ModelError::Diffusion("GBM drift must be finite"));
                }
                if self.x0 <= 0.0 {
                    return Err(ModelError::InitialLevel(self.x0));
                }
            }
            Dynamics::Cev { gamma } => {
                if !(gamma.is_finite() && *gamma > 1.0) {
                    return Err(ModelError::CevGamma(*gamma));
                }
                if self.x0 <= 0.0 {
                    return Err(ModelError::InitialLevel(self.x0));
                }
            }
            Dynamics::Driftless { a } => match a {
                DiffusionCoef::Constant(c) if !(c.is_finite() && *c > 0.0) => {
                    return Err(ModelError::Diffusion("constant a must be positive"));
                }
                DiffusionCoef::Identity if self.x0 <= 0.0 => {
                    return Err(ModelError::InitialLevel(self.x0));
                }
                DiffusionCoef::Table(t) if t.min_value() <= 0.0 => {
                    return Err(ModelError::Diffusion("a table must be strictly positive"));
                }
                _ => {}
            },
        }
        self.payoff.validate()
    }
}

/// Constant `m x m` rate matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateMatrix {
    m: usize,
    q: Vec<f64>,
}

impl RateMatrix {
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self, ModelError> {
        if m == 0 {
            return Err(ModelError::NoRegimes);
        }
        if entries.len() != m * m {
            return Err(ModelError::NotSquare { m, len: entries.len() });
        }
        Ok(Self { m, q: entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let m = rows.len();
        let mut q = Vec::with_capacity(m * m);
        for row in rows {
            if row.len() != m {
                return Err(ModelError::NotSquare { m, len: rows.iter().map(Vec::len).sum() });
            }
            q.extend_from_slice(row);
        }
        Self::new(m, q)
    }

    /// Tridiagonal matrix from its up-rates (`up[i] = q[i][i+1]`) and
    /// down-rates (`down[i] = q[i+1][i]`), diagonal filled so rows sum to zero.
    pub fn tridiagonal(up: &[f64], down: &[f64]) -> Result<Self, ModelError> {
        if up.len() != down.len() {
            return Err(ModelError::BoxCount { expected: up.len(), plus: up.len(), minus: down.len() });
        }
        let m = up.len() + 1;
        let mut q = alloc::vec![0.0; m * m];
        for i in 0..m - 1 {
            q[i * m + i + 1] = up[i];
            q[(i + 1) * m + i] = down[i];
        }
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| q[i * m + j]).sum();
            q[i * m + i] = -off;
        }
        Ok(Self { m, q })
    }

    pub fn zero(m: usize) -> Self {
        Self { m, q: alloc::vec![0.0; m * m] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.m + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.q
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    /// Rate of jumping from regime `i` to `i + 1` (zero for the top regime).
    pub fn up(&self, i: usize) -> f64 {
        if i + 1 < self.m {
            self.get(i, i + 1)
        } else {
            0.0
        }
    }

    /// Rate of jumping from regime `i` to `i - 1` (zero for the bottom regime).
    pub fn down(&self, i: usize) -> f64 {
        if i > 0 {
            self.get(i, i - 1)
        } else {
            0.0
        }
    }
}

/// One failed Q-matrix condition. Indices are 0-based; `Display` prints
/// 1-based regime labels.
#[derive(Debug, Clone, PartialEq)]
pub enum RateViolation {
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    OutsideBand { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for RateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RateViolation::NegativeOffDiagonal { row, col, value } => {
                write!(f, "({}, {}): negative off-diagonal rate {value}", row + 1, col + 1)
            }
            RateViolation::OutsideBand { row, col, value } => {
                write!(f, "({}, {}): rate {value} outside the tridiagonal band", row + 1, col + 1)
            }
            RateViolation::RowSum { row, sum } => write!(f, "row {}: sums to {sum}", row + 1),
            RateViolation::NonFinite { row, col } => {
                write!(f, "({}, {}): non-finite entry", row + 1, col + 1)
            }
        }
    }
}

/// Checks the Q-matrix conditions and the skip-free support. The error
/// lists every violated cell.
pub fn validate_rate_matrix(q: &RateMatrix) -> Result<(), Vec<RateViolation>> {
    let m = q.m();
    let mut out = Vec::new();
    for i in 0..m {
        let mut sum = 0.0;
        for j in 0..m {
            let v = q.get(i, j);
            if !v.is_finite() {
                out.push(RateViolation::NonFinite { row: i, col: j });
                continue;
            }
            sum += v;
            if i == j {
                continue;
            }
            if v < 0.0 {
                out.push(RateViolation::NegativeOffDiagonal { row: i, col: j, value: v });
            }
            if i.abs_diff(j) > 1 && v != 0.0 {
                out.push(RateViolation::OutsideBand { row: i, col: j, value: v });
            }
        }
        if sum.is_finite() && sum.abs() > ROW_SUM_TOL {
            out.push(RateViolation::RowSum { row: i, sum });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Closed interval `[lo, hi]` with `0 < lo <= hi < inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ModelError> {
        if lo > 0.0 && lo <= hi && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(ModelError::Interval { lo, hi })
        }
    }

    pub fn singleton(v: f64) -> Result<Self, ModelError> {
        Self::new(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// `k` evenly spaced points including both endpoints (one point for a
    /// singleton or `k == 1`).
    pub fn sample_points(&self, k: usize) -> Vec<f64> {
        if self.lo == self.hi || k <= 1 {
            return alloc::vec![self.lo];
        }
        (0..k)
            .map(|j| {
                if j == k - 1 {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * j as f64 / (k - 1) as f64
                }
            })
            .collect()
    }
}

/// Compact rate boxes: `plus[i]` constrains `q[i][i+1]` and `minus[i]`
/// constrains `q[i+1][i]`, for `i in 0..m-1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateBoxes {
    plus: Vec<Interval>,
    minus: Vec<Interval>,
}

impl RateBoxes {
    pub fn new(plus: Vec<Interval>, minus: Vec<Interval>) -> Result<Self, ModelError> {
        if plus.len() != minus.len() {
            return Err(ModelError::BoxCount {
                expected: plus.len().max(minus.len()),
                plus: plus.len(),
                minus: minus.len(),
            });
        }
        Ok(Self { plus, minus })
    }

    pub fn from_pairs(plus: &[(f64, f64)], minus: &[(f64, f64)]) -> Result<Self, ModelError> {
        let p = plus.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect::<Result<_, _>>()?;
        let n = minus.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect::<Result<_, _>>()?;
        Self::new(p, n)
    }

    /// Boxes for a single regime (no rates to choose).
    pub fn trivial() -> Self {
        Self { plus: Vec::new(), minus: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.plus.len() + 1
    }

    pub fn plus(&self) -> &[Interval] {
        &self.plus
    }

    pub fn minus(&self) -> &[Interval] {
        &self.minus
    }

    /// Box for the up-rate out of regime `i`; `None` for the top regime.
    pub fn up(&self, i: usize) -> Option<Interval> {
        self.plus.get(i).copied()
    }

    /// Box for the down-rate out of regime `i`; `None` for regime 0.
    pub fn down(&self, i: usize) -> Option<Interval> {
        i.checked_sub(1).and_then(|k| self.minus.get(k).copied())
    }

    /// All intervals in a fixed order: plus boxes, then minus boxes.
    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.plus.iter().chain(self.minus.iter()).copied()
    }

    fn matrix_from_flat(&self, rates: &[f64]) -> RateMatrix {
        let k = self.plus.len();
        RateMatrix::tridiagonal(&rates[..k], &rates[k..]).expect("matching lengths")
    }

    /// Matrix with every rate drawn uniformly from its box.
    pub fn sample_matrix<R: RngCore + ?Sized>(&self, rng: &mut R) -> RateMatrix {
        let rates: Vec<f64> = self
            .intervals()
            .map(|iv| iv.lo + (iv.hi - iv.lo) * crate::stats::unit_f64(rng.next_u64()))
            .collect();
        self.matrix_from_flat(&rates)
    }

    /// Cartesian product of `per_box` evenly spaced points in every box, in
    /// lexicographic order with the first plus box varying slowest.
    pub fn grid_matrices(&self, per_box: usize) -> Vec<RateMatrix> {
        let axes: Vec<Vec<f64>> = self.intervals().map(|iv| iv.sample_points(per_box)).collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        let mut idx = alloc::vec![0usize; axes.len()];
        for _ in 0..total {
            let rates: Vec<f64> = idx.iter().zip(&axes).map(|(&j, a)| a[j]).collect();
            out.push(self.matrix_from_flat(&rates));
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }

    /// Size of [`Self::grid_matrices`] without building it.
    pub fn grid_size(&self, per_box: usize) -> usize {
        self.intervals()
            .map(|iv| iv.sample_points(per_box).len())
            .fold(1usize, |acc, n| acc.saturating_mul(n))
    }
}

/// Closed-interval membership of every off-diagonal rate in its box, and
/// zero outside the band.
pub fn is_admissible(q: &RateMatrix, boxes: &RateBoxes) -> Result<bool, ModelError> {
    let m = q.m();
    if m != boxes.m() {
        return Err(ModelError::DimensionMismatch { matrix: m, boxes: boxes.m() });
    }
    for i in 0..m {
        for j in 0..m {
            if i.abs_diff(j) > 1 && q.get(i, j) != 0.0 {
                return Ok(false);
            }
        }
        if let Some(iv) = boxes.up(i) {
            if !iv.contains(q.get(i, i + 1)) {
                return Ok(false);
            }
        }
        if let Some(iv) = boxes.down(i) {
            if !iv.contains(q.get(i, i - 1)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    NonMonotone,
    Trivial,
}

impl Monotonicity {
    pub fn opposite(self) -> Self {
        match self {
            Monotonicity::Increasing => Monotonicity::Decreasing,
            Monotonicity::Decreasing => Monotonicity::Increasing,
            other => other,
        }
    }
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Monotonicity::Increasing => "increasing",
            Monotonicity::Decreasing => "decreasing",
            Monotonicity::NonMonotone => "non-monotone",
            Monotonicity::Trivial => "trivial",
        })
    }
}

/// Strict monotonicity of the volatility map in the regime index.
pub fn sigma_monotonicity(sigma: &[f64]) -> Monotonicity {
    if sigma.len() <= 1 {
        return Monotonicity::Trivial;
    }
    if sigma.windows(2).all(|w| w[0] < w[1]) {
        Monotonicity::Increasing
    } else if sigma.windows(2).all(|w| w[0] > w[1]) {
        Monotonicity::Decreasing
    } else {
        Monotonicity::NonMonotone
    }
}
