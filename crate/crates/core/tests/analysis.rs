use proptest::prelude::*;

use rakg_core::analysis::{expected_rates, guess_count_pmf, key_guess_probability};
use rakg_core::special::marcum_q1;

proptest! {
    #[test]
    fn pmf_is_a_distribution(n in 0u64..300, frac in 0.0f64..=1.0, p0 in 0.0f64..=1.0, p1 in 0.0f64..=1.0) {
        let n0 = (n as f64 * frac) as u64;
        let pmf = guess_count_pmf(n, n0, p0, p1).unwrap();
        prop_assert_eq!(pmf.len() as u64, n + 1);
        prop_assert!(pmf.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn expected_kre_lies_between_the_two_probabilities(
        n in 1u64..10_000, frac in 0.0f64..=1.0, p0 in 0.0f64..=1.0, p1 in 0.0f64..=1.0,
    ) {
        let n0 = (n as f64 * frac) as u64;
        let r = expected_rates(n, n0, p0, p1, n * 3).unwrap();
        let kre = r.kre.unwrap();
        prop_assert!(kre >= p0.min(p1) - 1e-12 && kre <= p0.max(p1) + 1e-12);
        prop_assert!((r.krr - kre / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_dominance_tests_agree(
        ell in 1u64..2_000_000, nf in 0.0f64..=1.0, n0f in 0.0f64..=1.0,
        p0 in 0.001f64..0.999, p1 in 0.001f64..0.999,
    ) {
        let n = (ell as f64 * nf) as u64;
        let n0 = (n as f64 * n0f) as u64;
        let k = key_guess_probability(ell, n, n0, p0, p1).unwrap();
        prop_assert_eq!(k.beats_random, k.beats_random_by_ratio);
        prop_assert!(k.ln_p_key <= 0.0);
    }

    #[test]
    fn marcum_is_a_decreasing_tail(a in 0.0f64..20.0, b in 0.0f64..20.0, step in 0.0f64..2.0) {
        let q = marcum_q1(a, b);
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!(marcum_q1(a, b + step) <= q + 1e-14);
    }
}

#[test]
fn guesses_at_one_half_match_random_guessing() {
    let k = key_guess_probability(1000, 400, 100, 0.5, 0.5).unwrap();
    assert!((k.ln_p_key - 1000.0 * 0.5f64.ln()).abs() < 1e-9);
}

#[test]
fn invalid_counts_are_rejected() {
    assert!(guess_count_pmf(5, 6, 0.5, 0.5).is_err());
    assert!(expected_rates(5, 2, 1.5, 0.5, 10).is_err());
    assert!(key_guess_probability(10, 11, 0, 0.5, 0.5).is_err());
}
