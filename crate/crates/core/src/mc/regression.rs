//! Least-squares continuation values (Longstaff-Schwartz) fitted by
//! backward induction, one regression per date and regime.

use alloc::vec;
use alloc::vec::Vec;

use super::sim::PathBatch;
use super::stopping::StoppingRule;
use super::McError;
use crate::model::PayoffSpec;
use crate::stats::pairwise_sum;

/// Continuation value `sum_j c_j T_j(z)` with `z` the level mapped from
/// `[lo, hi]` onto `[-1, 1]` and clamped there.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fit {
    pub lo: f64,
    pub hi: f64,
    pub coef: Vec<f64>,
}

impl Fit {
    fn map(&self, x: f64) -> f64 {
        if self.hi > self.lo {
            (2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let z = self.map(x);
        let mut acc = 0.0;
        chebyshev(z, self.coef.len() - 1, |j, t| acc += self.coef[j] * t);
        acc
    }
}

fn chebyshev(z: f64, degree: usize, mut f: impl FnMut(usize, f64)) {
    let (mut a, mut b) = (1.0, z);
    f(0, a);
    if degree >= 1 {
        f(1, b);
    }
    for j in 2..=degree {
        let c = 2.0 * z * b - a;
        f(j, c);
        a = b;
        b = c;
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionRule {
    degree: usize,
    dt: f64,
    n_steps: usize,
    /// `fits[k][y]`; `None` means never stop early there.
    fits: Vec<Vec<Option<Fit>>>,
}

impl RegressionRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn fit(&self, k: usize, y: usize) -> Option<&Fit> {
        self.fits.get(k).and_then(|r| r.get(y)).and_then(Option::as_ref)
    }

    /// Stop when the payoff is positive and at least the fitted
    /// continuation value.
    pub fn stops(&self, k: usize, x: f64, y: usize, g: f64) -> bool {
        if k >= self.n_steps {
            return true;
        }
        match self.fit(k, y) {
            Some(fit) => g > 0.0 && g >= fit.eval(x),
            None => false,
        }
    }
}

/// Minimum number of in-the-money paths for a regression at one date.
fn min_sample(degree: usize) -> usize {
    (4 * (degree + 1)).max(20)
}

/// Fits a regression stopping rule on `paths`. Only in-the-money paths
/// enter each regression.
pub fn fit_regression_rule(
    paths: &PathBatch,
    alpha: f64,
    payoff: &PayoffSpec,
    degree: usize,
) -> Result<StoppingRule, McError> {
    if !(2..=5).contains(&degree) {
        return Err(McError::Degree(degree));
    }
    if paths.n_paths < 1000 {
        return Err(McError::TooFewPaths(paths.n_paths));
    }
    let n = paths.n_steps;
    let m = paths.y.iter().copied().max().unwrap_or(0) as usize + 1;
    let w = n + 1;
    let mut cash: Vec<f64> = (0..paths.n_paths).map(|p| payoff.eval(paths.x[p * w + n])).collect();
    let mut tau: Vec<usize> = vec![n; paths.n_paths];
    let mut fits: Vec<Vec<Option<Fit>>> = vec![vec![None; m]; n];
    let disc = |from: usize, to: usize| libm::exp(-alpha * (paths.times[to] - paths.times[from]));

    for k in (1..n).rev() {
        for y in 0..m {
            let itm: Vec<usize> = (0..paths.n_paths)
                .filter(|&p| paths.y[p * w + k] as usize == y && payoff.eval(paths.x[p * w + k]) > 0.0)
                .collect();
            if itm.len() < min_sample(degree) {
                continue;
            }
            let xs: Vec<f64> = itm.iter().map(|&p| paths.x[p * w + k]).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                continue;
            }
            let target: Vec<f64> = itm.iter().map(|&p| cash[p] * disc(k, tau[p])).collect();
            let mut fit = Fit { lo, hi, coef: Vec::new() };
            fit.coef = least_squares(&xs, &target, degree, |x| fit.map(x))
                .ok_or(McError::DegenerateRegression { step: k, regime: y })?;
            for (&p, &x) in itm.iter().zip(&xs) {
                let g = payoff.eval(x);
                if g >= fit.eval(x) {
                    cash[p] = g;
                    tau[p] = k;
                }
            }
            fits[k][y] = Some(fit);
        }
    }

    // every path starts at (x0, y0): the continuation value is a constant
    let y0 = paths.y[0] as usize;
    let x0 = paths.x[0];
    let cont: Vec<f64> = (0..paths.n_paths).map(|p| cash[p] * disc(0, tau[p])).collect();
    let c0 = pairwise_sum(&cont) / paths.n_paths as f64;
    fits[0][y0] = Some(Fit { lo: x0, hi: x0, coef: vec![c0] });

    Ok(StoppingRule::Regression(RegressionRule { degree, dt: paths.dt, n_steps: n, fits }))
}

/// Chebyshev least squares via Cholesky on the normal equations.
fn least_squares(xs: &[f64], ys: &[f64], degree: usize, map: impl Fn(f64) -> f64) -> Option<Vec<f64>> {
    let d = degree + 1;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut row = vec![0.0; d];
    for (&x, &y) in xs.iter().zip(ys) {
        chebyshev(map(x), degree, |j, t| row[j] = t);
        for i in 0..d {
            b[i] += row[i] * y;
            for j in 0..=i {
                a[i * d + j] += row[i] * row[j];
            }
        }
    }
    let scale = (0..d).map(|i| a[i * d + i]).fold(0.0, f64::max);
    // in-place lower Cholesky factor
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= a[j * d + k] * a[j * d + k];
        }
        if !(s > 1e-12 * scale) {
            return None;
        }
        let l = libm::sqrt(s);
        a[j * d + j] = l;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / l;
        }
    }
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * d + k] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= a[k * d + i] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{price, simulate, RateStrategy};
    use crate::model::{Dynamics, PiecewiseLinear, ProblemSpec, RateMatrix};

    fn problem(payoff: PayoffSpec) -> ProblemSpec {
        ProblemSpec {
            dynamics: Dynamics::Gbm { mu: 0.05 },
            sigma: alloc::vec![0.2, 0.4],
            payoff,
            horizon: 1.0,
            alpha: 0.05,
            x0: 100.0,
            y0: 0,
        }
    }

    fn strategy() -> RateStrategy {
        RateStrategy::Constant(RateMatrix::tridiagonal(&[1.0], &[0.5]).unwrap())
    }

    #[test]
    fn least_squares_recovers_a_cubic() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let fit_map = |x: f64| 2.0 * x / 4.9 - 1.0;
        let coef = least_squares(&xs, &ys, 3, fit_map).unwrap();
        let fit = Fit { lo: 0.0, hi: 4.9, coef };
        for &x in &[0.3, 2.2, 4.0] {
            assert!((fit.eval(x) - (1.0 - 2.0 * x + 0.5 * x * x * x)).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_design_is_rejected() {
        let xs = [1.0; 40];
        let ys = [2.0; 40];
        assert!(least_squares(&xs, &ys, 2, |x| x - 1.0).is_none());
    }

    #[test]
    fn zero_payoff_never_stops_early() {
        let zero = PayoffSpec::table(PiecewiseLinear::from_points(&[(0.0, 0.0), (1.0, 0.0)]).unwrap());
        let p = problem(zero.clone());
        let b = simulate(&p, &strategy(), 1000, 0.1, 4).unwrap();
        let rule = fit_regression_rule(&b, p.alpha, &zero, 3).unwrap();
        let StoppingRule::Regression(r) = &rule else { unreachable!() };
        for k in 1..b.n_steps {
            assert!(r.fit(k, 0).is_none() && r.fit(k, 1).is_none());
        }
        assert!(!r.stops(0, 100.0, 0, 0.0));
        assert_eq!(price(&b, &rule, p.alpha, &zero).unwrap().mean, 0.0);
    }

    #[test]
    fn refitting_is_deterministic() {
        let p = problem(PayoffSpec::put(100.0));
        let fit = || {
            let b = simulate(&p, &strategy(), 2000, 0.05, 21).unwrap();
            fit_regression_rule(&b, p.alpha, &p.payoff, 3).unwrap()
        };
        assert_eq!(fit(), fit());
    }

    #[test]
    fn argument_checks() {
        let p = problem(PayoffSpec::put(100.0));
        let b = simulate(&p, &strategy(), 999, 0.1, 1).unwrap();
        assert_eq!(fit_regression_rule(&b, 0.05, &p.payoff, 3), Err(McError::TooFewPaths(999)));
        assert_eq!(fit_regression_rule(&b, 0.05, &p.payoff, 6), Err(McError::Degree(6)));
        assert_eq!(fit_regression_rule(&b, 0.05, &p.payoff, 1), Err(McError::Degree(1)));
    }
}
