use worstcase_core::exec::Sequential;
use worstcase_core::oracle::{binomial_american_put, brute_force_min};
use worstcase_core::pde::*;
use worstcase_core::*;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn gbm(sigma: Vec<f64>) -> ProblemSpec {
    ProblemSpec {
        dynamics: Dynamics::Gbm { mu: 0.05 },
        sigma,
        payoff: PayoffSpec::put(100.0),
        horizon: 1.0,
        alpha: 0.05,
        x0: 100.0,
        y0: 0,
    }
}

fn boxes() -> RateBoxes {
    RateBoxes::from_pairs(&[(0.5, 2.0)], &[(0.3, 1.0)]).unwrap()
}

fn zero_payoff() -> PayoffSpec {
    PayoffSpec::table(PiecewiseLinear::from_points(&[(0.0, 0.0), (1.0, 0.0)]).unwrap())
}

fn max_excess(a: &ValueSurface, b: &ValueSurface) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn single_regime_put_agrees_with_binomial_tree() {
    let p = gbm(vec![0.2]);
    let tree = binomial_american_put(100.0, 100.0, 0.05, 0.2, 1.0, 5000);
    let g = build_grid(&p, 200, 200, 5.0).unwrap();
    let s = solve_constant(&p, &RateMatrix::zero(1), &g).unwrap();
    assert!(((s.initial_price() - tree) / tree).abs() < 5e-3);
    assert!(s.invariants().all_ok(), "{:?}", s.invariants());
}

#[test]
fn refinement_changes_shrink() {
    let p = gbm(vec![0.2]);
    let price = |n: usize| {
        let g = build_grid(&p, n, n, 5.0).unwrap();
        solve_constant(&p, &RateMatrix::zero(1), &g).unwrap().initial_price()
    };
    let (a, b, c) = (price(50), price(100), price(200));
    assert!((c - b).abs() <= 0.5 * (b - a).abs(), "{a} {b} {c}");
}

#[test]
fn zero_payoff_gives_zero_surface_fully_exercised() {
    let mut p = gbm(vec![0.2, 0.4]);
    p.payoff = zero_payoff();
    let g = build_grid(&p, 41, 11, 5.0).unwrap();
    let s = solve_constant(&p, &RateMatrix::tridiagonal(&[1.0], &[1.0]).unwrap(), &g).unwrap();
    assert!(s.values().iter().all(|&v| v == 0.0));
    for n in 0..g.nt() {
        for y in 0..2 {
            assert!(s.mask_slice(y, n).iter().all(|&e| e));
        }
    }
    let (h, field) = solve_worstcase_hjb(&p, &boxes(), &g).unwrap();
    assert!(h.values().iter().all(|&v| v == 0.0));
    // ties resolve to the extremal endpoints for increasing volatility
    assert!(field.matches(&extremal_matrix(&boxes(), Monotonicity::Increasing).unwrap()));
}

#[test]
fn equal_volatilities_replicate_the_single_regime_surface() {
    let g = build_grid(&gbm(vec![0.2]), 120, 120, 5.0).unwrap();
    let one = solve_constant(&gbm(vec![0.2]), &RateMatrix::zero(1), &g).unwrap();
    let two = solve_constant(&gbm(vec![0.2, 0.2]), &RateMatrix::tridiagonal(&[1.3], &[0.7]).unwrap(), &g).unwrap();
    let mut d: f64 = 0.0;
    for n in 0..g.nt() {
        for y in 0..2 {
            for i in 0..g.nx() {
                d = d.max((two.value(i, y, n) - one.value(i, 0, n)).abs());
            }
        }
    }
    assert!(d <= 1e-8, "{d:e}");
}

#[test]
fn singleton_boxes_make_hjb_equal_constant_solve() {
    let p = gbm(vec![0.2, 0.4]);
    let b = RateBoxes::from_pairs(&[(1.1, 1.1)], &[(0.6, 0.6)]).unwrap();
    let q = RateMatrix::tridiagonal(&[1.1], &[0.6]).unwrap();
    let g = build_grid(&p, 100, 100, 5.0).unwrap();
    let c = solve_constant(&p, &q, &g).unwrap();
    let (h, field) = solve_worstcase_hjb(&p, &b, &g).unwrap();
    assert!(surface_sup_diff(&c, &h).unwrap() <= 1e-12);
    assert!(field.matches(&q));
}

#[test]
fn hjb_selects_the_extremal_matrix_everywhere() {
    for (sigma, mono) in [(vec![0.2, 0.4], Monotonicity::Increasing), (vec![0.4, 0.2], Monotonicity::Decreasing)] {
        let p = gbm(sigma);
        let g = build_grid(&p, 120, 120, 5.0).unwrap();
        let q = extremal_matrix(&boxes(), mono).unwrap();
        let c = solve_constant(&p, &q, &g).unwrap();
        let (h, field) = solve_worstcase_hjb(&p, &boxes(), &g).unwrap();
        assert!(surface_sup_diff(&c, &h).unwrap() <= 1e-7);
        assert!(field.is_constant());
        assert_eq!(field.count_mismatches(&q), 0);
    }
}

#[test]
fn extremal_matrix_dominates_sampled_matrices() {
    let p = gbm(vec![0.2, 0.4]);
    let g = build_grid(&p, 100, 100, 5.0).unwrap();
    let ql = extremal_matrix(&boxes(), Monotonicity::Increasing).unwrap();
    let low = solve_constant(&p, &ql, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let q = boxes().sample_matrix(&mut rng);
        let s = solve_constant(&p, &q, &g).unwrap();
        assert!(max_excess(&low, &s) <= 1e-6);
    }
}

#[test]
fn brute_force_certifies_the_extremal_matrix() {
    for (sigma, mono) in [(vec![0.2, 0.4], Monotonicity::Increasing), (vec![0.4, 0.2], Monotonicity::Decreasing)] {
        let p = gbm(sigma);
        let g = build_grid(&p, 80, 80, 5.0).unwrap();
        let r = brute_force_min(&Sequential, &p, &boxes(), &g, 2, &SolverSettings::default()).unwrap();
        assert_eq!(r.evaluated.len(), 4);
        assert_eq!(r.argmin, extremal_matrix(&boxes(), mono).unwrap());
    }
}

#[test]
fn brute_force_with_singleton_boxes_evaluates_once() {
    let p = gbm(vec![0.2, 0.4]);
    let b = RateBoxes::from_pairs(&[(1.0, 1.0)], &[(2.0, 2.0)]).unwrap();
    let g = build_grid(&p, 40, 20, 5.0).unwrap();
    let r = brute_force_min(&Sequential, &p, &b, &g, 3, &SolverSettings::default()).unwrap();
    assert_eq!(r.evaluated.len(), 1);
    assert_eq!(r.argmin, RateMatrix::tridiagonal(&[1.0], &[2.0]).unwrap());
}

#[test]
fn brute_force_with_equal_volatilities_keeps_first_tie() {
    let p = gbm(vec![0.3, 0.3]);
    let g = build_grid(&p, 60, 40, 5.0).unwrap();
    let r = brute_force_min(&Sequential, &p, &boxes(), &g, 2, &SolverSettings::default()).unwrap();
    let prices: Vec<f64> = r.evaluated.iter().map(|e| e.1).collect();
    let spread = prices.iter().fold(0.0f64, |a, &b| a.max((b - prices[0]).abs()));
    assert!(spread <= 1e-8, "{spread:e}");
    // exact ties keep the first matrix; near ties may pick another, all are
    // admissible and within the spread
    assert!((r.price - prices[0]).abs() <= 1e-8);
}

#[test]
fn regime_ordering_follows_volatility_ordering() {
    let q = RateMatrix::tridiagonal(&[0.8], &[1.7]).unwrap();
    let p = gbm(vec![0.2, 0.4]);
    let g = build_grid(&p, 100, 100, 5.0).unwrap();
    assert!(regime_order_violation(&solve_constant(&p, &q, &g).unwrap(), true) <= 1e-8);
    let p = gbm(vec![0.4, 0.2]);
    let g = build_grid(&p, 100, 100, 5.0).unwrap();
    assert!(regime_order_violation(&solve_constant(&p, &q, &g).unwrap(), false) <= 1e-8);
}

#[test]
fn doubling_volatility_never_lowers_the_put() {
    let lo = gbm(vec![0.2]);
    let hi = gbm(vec![0.4]);
    let g = build_grid(&hi, 100, 100, 5.0).unwrap();
    let a = solve_constant(&lo, &RateMatrix::zero(1), &g).unwrap();
    let b = solve_constant(&hi, &RateMatrix::zero(1), &g).unwrap();
    assert!(max_excess(&a, &b) <= 1e-8);
}

#[test]
fn boundaries_are_ordered_and_undefined_at_maturity() {
    let p = gbm(vec![0.2, 0.4]);
    let g = build_grid(&p, 200, 200, 5.0).unwrap();
    let q = extremal_matrix(&boxes(), Monotonicity::Increasing).unwrap();
    let s = solve_constant(&p, &q, &g).unwrap();
    let b = extract_boundary(&s).unwrap();
    assert!(b.at(0, 0).is_nan() && b.at(1, 0).is_nan());
    for n in 2..g.nt() {
        assert!(b.at(0, n) > b.at(1, n), "layer {n}: {} {}", b.at(0, n), b.at(1, n));
        assert!(b.at(0, n) < 100.0);
    }
    // far above the strike the put is never exercised
    let top = g.nx() - 2;
    assert!(!s.exercised(top, 0, g.nt() - 1));
}

#[test]
fn boundary_extraction_needs_a_put() {
    let mut p = gbm(vec![0.2]);
    p.payoff = PayoffSpec::table(PiecewiseLinear::from_points(&[(50.0, 50.0), (100.0, 0.0)]).unwrap());
    let g = build_grid(&p, 30, 10, 5.0).unwrap();
    let s = solve_constant(&p, &RateMatrix::zero(1), &g).unwrap();
    assert_eq!(extract_boundary(&s), Err(PdeError::UnsupportedPayoff));
}

#[test]
fn sup_diff_of_shifted_surface() {
    let p = gbm(vec![0.2]);
    let g = build_grid(&p, 30, 10, 5.0).unwrap();
    let a = solve_constant(&p, &RateMatrix::zero(1), &g).unwrap();
    assert_eq!(surface_sup_diff(&a, &a).unwrap(), 0.0);
    let g2 = build_grid(&p, 31, 10, 5.0).unwrap();
    let c = solve_constant(&p, &RateMatrix::zero(1), &g2).unwrap();
    assert_eq!(surface_sup_diff(&a, &c), Err(PdeError::ShapeMismatch));
}

#[test]
fn cev_surfaces_keep_their_invariants() {
    let p = ProblemSpec {
        dynamics: Dynamics::Cev { gamma: 1.5 },
        sigma: vec![0.2, 0.4],
        payoff: PayoffSpec { kind: PayoffKind::Put { strike: 1.0 }, holder_beta: 1.0 },
        horizon: 1.0,
        alpha: 0.0,
        x0: 1.0,
        y0: 0,
    };
    let g = build_grid(&p, 100, 100, 5.0).unwrap();
    let ql = extremal_matrix(&boxes(), Monotonicity::Increasing).unwrap();
    let low = solve_constant(&p, &ql, &g).unwrap();
    assert!(low.invariants().all_ok(), "{:?}", low.invariants());
    let other = solve_constant(&p, &RateMatrix::tridiagonal(&[2.0], &[0.3]).unwrap(), &g).unwrap();
    assert!(max_excess(&low, &other) <= 1e-6);
}
