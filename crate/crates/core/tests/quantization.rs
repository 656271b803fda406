use proptest::prelude::*;

use rakg_core::quantize::{find_excursions, run_quantization, thresholds, QuantizerConfig};

/// Moments from raw power sums, independent of the two-pass code path.
fn naive_thresholds(x: &[f64], beta: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let mean = s1 / n;
    let std = (s2 / n - mean * mean).max(0.0).sqrt();
    (mean - beta * std, mean + beta * std)
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-90.0f64..-40.0, 2..400)
}

proptest! {
    #[test]
    fn thresholds_match_naive_moments(x in series(), beta in 0.05f64..0.95) {
        let t = thresholds(&x, beta).unwrap();
        let (lo, hi) = naive_thresholds(&x, beta);
        prop_assert!((t.lower - lo).abs() < 1e-6);
        prop_assert!((t.upper - hi).abs() < 1e-6);
        prop_assert!(t.lower <= t.upper);
    }

    #[test]
    fn single_round_excursions_are_a_recount(x in series(), beta in 0.05f64..0.95) {
        let t = thresholds(&x, beta).unwrap();
        let expected: Vec<usize> = (0..x.len()).filter(|&i| x[i] > t.upper || x[i] < t.lower).collect();
        prop_assert_eq!(find_excursions(&x, t, 1), expected);
    }

    #[test]
    fn wider_beta_never_adds_excursions(x in series(), b1 in 0.05f64..0.9, gap in 0.0f64..0.09) {
        let (narrow, wide) = (thresholds(&x, b1).unwrap(), thresholds(&x, b1 + gap).unwrap());
        let kept = find_excursions(&x, wide, 1);
        let base = find_excursions(&x, narrow, 1);
        prop_assert!(kept.iter().all(|i| base.contains(i)));
    }

    #[test]
    fn bob_keeps_a_subset_and_bits_follow_the_side(
        pairs in prop::collection::vec((-90.0f64..-40.0, -1.0f64..1.0), 2..400),
        e in 1usize..4,
    ) {
        let x_a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let x_b: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
        let q = run_quantization(&x_a, &x_b, &QuantizerConfig { beta: 0.4, excursion_len: e }).unwrap();
        prop_assert!(q.l_b.iter().all(|i| q.l_a.contains(i)));
        prop_assert_eq!(&q.s_a.source_rounds, &q.l_b);
        for (bit, &i) in q.s_a.bits.iter().zip(&q.l_b) {
            prop_assert_eq!(*bit == 1, x_a[i] > q.alice_thresholds.upper);
        }
        for (bit, &i) in q.s_b.bits.iter().zip(&q.l_b) {
            prop_assert_eq!(*bit == 1, x_b[i] > q.bob_thresholds.upper);
        }
    }

    #[test]
    fn identical_series_give_identical_keys(x in series()) {
        let q = run_quantization(&x, &x, &QuantizerConfig::default()).unwrap();
        prop_assert_eq!(&q.l_a, &q.l_b);
        prop_assert_eq!(q.s_a, q.s_b);
    }
}

#[test]
fn erasures_are_never_excursions() {
    let x = [f64::NEG_INFINITY, -50.0, -80.0, f64::NEG_INFINITY, -65.0];
    let t = thresholds(&x, 0.4).unwrap();
    let l = find_excursions(&x, t, 1);
    assert_eq!(l, vec![1, 2]);
}

#[test]
fn out_of_range_beta_is_rejected() {
    let x = [-60.0, -70.0];
    for beta in [0.0, 1.0, 1.5, f64::NAN] {
        let cfg = QuantizerConfig { beta, excursion_len: 1 };
        assert!(run_quantization(&x, &x, &cfg).unwrap_err().is_validation());
    }
}
