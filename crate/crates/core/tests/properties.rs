use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use worstcase_core::extremal::pointwise_rates;
use worstcase_core::stats::{pairwise_sum, Estimate};
use worstcase_core::*;

fn boxes_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.01f64..5.0, 0.0f64..3.0).prop_map(|(lo, w)| (lo, lo + w)), 2..=8)
}

fn split(pairs: &[(f64, f64)]) -> RateBoxes {
    let h = pairs.len() / 2;
    RateBoxes::from_pairs(&pairs[..h], &pairs[h..2 * h]).unwrap()
}

proptest! {
    #[test]
    fn sampled_matrices_are_valid_and_admissible(pairs in boxes_strategy(), seed in any::<u64>()) {
        let b = split(&pairs);
        let q = b.sample_matrix(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(validate_rate_matrix(&q), Ok(()));
        prop_assert_eq!(is_admissible(&q, &b), Ok(true));
    }

    #[test]
    fn widening_boxes_keeps_admissibility(pairs in boxes_strategy(), seed in any::<u64>(), grow in 0.0f64..2.0) {
        let b = split(&pairs);
        let q = b.sample_matrix(&mut ChaCha8Rng::seed_from_u64(seed));
        let wide: Vec<(f64, f64)> = pairs.iter().map(|&(lo, hi)| (lo / (1.0 + grow), hi + grow)).collect();
        prop_assert_eq!(is_admissible(&q, &split(&wide)), Ok(true));
    }

    #[test]
    fn extremal_matrices_are_valid_and_admissible(pairs in boxes_strategy()) {
        let b = split(&pairs);
        for mono in [Monotonicity::Increasing, Monotonicity::Decreasing] {
            let q = extremal_matrix(&b, mono).unwrap();
            prop_assert_eq!(validate_rate_matrix(&q), Ok(()));
            prop_assert_eq!(is_admissible(&q, &b), Ok(true));
        }
    }

    #[test]
    fn bang_bang_rates_minimise_the_linear_form(pairs in boxes_strategy(), du in -5.0f64..5.0, dd in -5.0f64..5.0, seed in any::<u64>()) {
        let b = split(&pairs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for y in 0..b.m() {
            let (up, down) = pointwise_rates(du, dd, y, &b);
            let best = du * up + dd * down;
            let q = b.sample_matrix(&mut rng);
            prop_assert!(best <= du * q.up(y) + dd * q.down(y) + 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_of_integers_is_exact(xs in prop::collection::vec(-1000i32..1000, 0..500)) {
        let fs: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        prop_assert_eq!(pairwise_sum(&fs), xs.iter().map(|&x| x as i64).sum::<i64>() as f64);
    }

    #[test]
    fn constant_samples_have_exact_mean(v in -1e6f64..1e6, n in 1usize..3000) {
        let e = Estimate::from_samples(&vec![v; n]);
        prop_assert_eq!(e.mean, v);
        prop_assert_eq!(e.std_error, 0.0);
    }
}
