//! The extremal constant rate matrix and the pointwise bang-bang selector.

use alloc::vec::Vec;
use thiserror::Error;

use crate::model::{Interval, Monotonicity, RateBoxes, RateMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtremalError {
    #[error("volatility is not monotone in the regime index; no constant extremal matrix is known")]
    NonMonotone,
}

/// Worst-case constant matrix for monotone volatility.
///
/// Increasing volatility: slowest move up, fastest move down. Decreasing
/// volatility: the mirror choice. A single regime gives the 1x1 zero matrix.
pub fn extremal_matrix(boxes: &RateBoxes, mono: Monotonicity) -> Result<RateMatrix, ExtremalError> {
    let (up, down): (Vec<f64>, Vec<f64>) = match mono {
        Monotonicity::NonMonotone => return Err(ExtremalError::NonMonotone),
        Monotonicity::Trivial if boxes.m() == 1 => return Ok(RateMatrix::zero(1)),
        Monotonicity::Increasing | Monotonicity::Trivial => (
            boxes.plus().iter().map(Interval::lo).collect(),
            boxes.minus().iter().map(Interval::hi).collect(),
        ),
        Monotonicity::Decreasing => (
            boxes.plus().iter().map(Interval::hi).collect(),
            boxes.minus().iter().map(Interval::lo).collect(),
        ),
    };
    Ok(RateMatrix::tridiagonal(&up, &down).expect("boxes have matching lengths"))
}

/// Which endpoint to pick when a value difference is exactly zero and the
/// rate does not affect the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lower endpoint in both directions.
    #[default]
    Infimum,
    /// The endpoint the extremal matrix uses for this volatility ordering.
    /// Falls back to `Infimum` for non-monotone or trivial orderings.
    Extremal(Monotonicity),
}

impl TieBreak {
    /// `(up, down)` choice at a tie: `true` means the upper endpoint.
    fn picks_sup(self) -> (bool, bool) {
        match self {
            TieBreak::Extremal(Monotonicity::Increasing) => (false, true),
            TieBreak::Extremal(Monotonicity::Decreasing) => (true, false),
            _ => (false, false),
        }
    }
}

fn minimize_linear(coef: f64, iv: Interval, tie_sup: bool) -> f64 {
    if coef > 0.0 {
        iv.lo()
    } else if coef < 0.0 {
        iv.hi()
    } else if tie_sup {
        iv.hi()
    } else {
        iv.lo()
    }
}

/// Exact minimizer of `dv_up * l_plus + dv_down * l_minus` over the boxes of
/// regime `y`, with ties broken towards the infimum. Directions that do not
/// exist for `y` return a zero rate.
pub fn pointwise_rates(dv_up: f64, dv_down: f64, y: usize, boxes: &RateBoxes) -> (f64, f64) {
    pointwise_rates_with(dv_up, dv_down, y, boxes, TieBreak::Infimum)
}

pub fn pointwise_rates_with(
    dv_up: f64,
    dv_down: f64,
    y: usize,
    boxes: &RateBoxes,
    tie: TieBreak,
) -> (f64, f64) {
    let (sup_up, sup_down) = tie.picks_sup();
    let lp = boxes.up(y).map_or(0.0, |iv| minimize_linear(dv_up, iv, sup_up));
    let lm = boxes.down(y).map_or(0.0, |iv| minimize_linear(dv_down, iv, sup_down));
    (lp, lm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_admissible, validate_rate_matrix};
    use alloc::vec;

    fn boxes() -> RateBoxes {
        RateBoxes::from_pairs(&[(0.5, 2.0)], &[(0.3, 1.0)]).unwrap()
    }

    #[test]
    fn increasing_reads_inf_up_sup_down() {
        let q = extremal_matrix(&boxes(), Monotonicity::Increasing).unwrap();
        assert_eq!(q.rows(), vec![vec![-0.5, 0.5], vec![1.0, -1.0]]);
    }

    #[test]
    fn decreasing_swaps_endpoints() {
        let q = extremal_matrix(&boxes(), Monotonicity::Decreasing).unwrap();
        assert_eq!(q.rows(), vec![vec![-2.0, 2.0], vec![0.3, -0.3]]);
    }

    #[test]
    fn singleton_boxes_give_the_unique_matrix() {
        let b = RateBoxes::from_pairs(&[(0.7, 0.7), (1.1, 1.1)], &[(0.4, 0.4), (0.9, 0.9)]).unwrap();
        let unique = RateMatrix::tridiagonal(&[0.7, 1.1], &[0.4, 0.9]).unwrap();
        assert_eq!(extremal_matrix(&b, Monotonicity::Increasing).unwrap(), unique);
        assert_eq!(extremal_matrix(&b, Monotonicity::Decreasing).unwrap(), unique);
    }

    #[test]
    fn trivial_single_regime() {
        let q = extremal_matrix(&RateBoxes::trivial(), Monotonicity::Trivial).unwrap();
        assert_eq!(q, RateMatrix::zero(1));
    }

    #[test]
    fn non_monotone_is_refused() {
        assert_eq!(extremal_matrix(&boxes(), Monotonicity::NonMonotone), Err(ExtremalError::NonMonotone));
    }

    #[test]
    fn extremal_output_is_valid_and_admissible() {
        let b = RateBoxes::from_pairs(&[(0.5, 2.0), (0.1, 0.2)], &[(0.3, 1.0), (3.0, 4.0)]).unwrap();
        for mono in [Monotonicity::Increasing, Monotonicity::Decreasing] {
            let q = extremal_matrix(&b, mono).unwrap();
            assert_eq!(validate_rate_matrix(&q), Ok(()));
            assert_eq!(is_admissible(&q, &b), Ok(true));
        }
    }

    #[test]
    fn bang_bang_picks_endpoint_by_sign() {
        let b = boxes();
        assert_eq!(pointwise_rates(0.2, 0.0, 0, &b).0, 0.5);
        assert_eq!(pointwise_rates(-0.1, 0.0, 0, &b).0, 2.0);
        assert_eq!(pointwise_rates(0.0, 0.0, 0, &b).0, 0.5);
        // regime 0 has no down move, top regime no up move
        assert_eq!(pointwise_rates(0.2, -1.0, 0, &b).1, 0.0);
        assert_eq!(pointwise_rates(0.2, -1.0, 1, &b), (0.0, 1.0));
        assert_eq!(pointwise_rates(0.2, 1.0, 1, &b), (0.0, 0.3));
    }

    #[test]
    fn extremal_tie_break_matches_extremal_matrix() {
        let b = boxes();
        for mono in [Monotonicity::Increasing, Monotonicity::Decreasing] {
            let q = extremal_matrix(&b, mono).unwrap();
            let tie = TieBreak::Extremal(mono);
            assert_eq!(pointwise_rates_with(0.0, 0.0, 0, &b, tie).0, q.up(0));
            assert_eq!(pointwise_rates_with(0.0, 0.0, 1, &b, tie).1, q.down(1));
        }
    }
}
