//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero when any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rakg_core::adversary::OpportunityKind;
use rakg_core::analysis::{closed_form_p0_p1, expected_rates, guess_count_pmf, key_guess_probability};
use rakg_core::config::{parse_config, ExperimentConfig, Scheme};
use rakg_core::experiment::{analyze, run_experiment};
use rakg_core::quantize::thresholds;
use rakg_core::reconcile::{commit, open, ReedSolomon, RsParams};
use rakg_core::session::simulate_session;
use rakg_core::special::marcum_q1;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn reference() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    parse_config(&PathBuf::from(path)).expect("reference config")
}

/// Mode-averaged tail fractions of Mallory's link estimated by drawing a
/// fresh mode and fresh path coefficients per sample.
fn monte_carlo_tails(cfg: &ExperimentConfig, samples: usize) -> (f64, f64, f64, f64) {
    let prep = cfg.prepare().unwrap();
    let clean = simulate_session(&prep.scenario, &prep.session, None, prep.quantizer.beta, cfg.seed).unwrap();
    let t = thresholds(&clean.trace.x_a, prep.quantizer.beta).unwrap();
    let link = prep.scenario.link_am();
    let fading = prep.scenario.fading_am;
    let power = prep.session.mallory_power_dbm;
    let closed = closed_form_p0_p1(link, &fading, t, power).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let (mut below, mut above) = (0usize, 0usize);
    for _ in 0..samples {
        let gains = link.mode(rng.random_range(0..link.mode_count()));
        let mut h = Complex64::new(0.0, 0.0);
        for (l, &g) in gains.iter().enumerate() {
            let mean = if l == 0 { fading.los_mean } else { Complex64::new(0.0, 0.0) };
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            h += (mean + Complex64::new(re, im) * fading.sigma0) * g;
        }
        let rss = 20.0 * h.norm().log10() + power;
        if rss < t.lower {
            below += 1;
        } else if rss > t.upper {
            above += 1;
        }
    }
    let n = samples as f64;
    (closed.p0, below as f64 / n, closed.p1, above as f64 / n)
}

fn closed_form_matches_monte_carlo() -> Outcome {
    let samples = 1_000_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for k in [1000.0, 10.0] {
        let mut cfg = reference();
        cfg.channel.k_factor = k;
        cfg.session.rounds = 20_000;
        let (p0, mc0, p1, mc1) = monte_carlo_tails(&cfg, samples);
        let tol = |p: f64| 3.0 * (p * (1.0 - p) / samples as f64).sqrt();
        let pass = (p0 - mc0).abs() <= tol(p0) && (p1 - mc1).abs() <= tol(p1);
        ok &= pass;
        lines.push(format!(
            "K={k}: p0 {p0:.5} vs {mc0:.5} (tol {:.5}), p1 {p1:.5} vs {mc1:.5} (tol {:.5})",
            tol(p0),
            tol(p1)
        ));
    }
    outcome(ok, lines.join("; "))
}

fn success_independent_of_opportunity() -> Outcome {
    let mut cfg = reference();
    cfg.session.rounds = 6_000_000;
    let prep = cfg.prepare().unwrap();
    let out = simulate_session(&prep.scenario, &prep.session, prep.adversary.as_ref(), prep.quantizer.beta, cfg.seed)
        .unwrap();
    let t = out.mallory_thresholds.unwrap();
    let tail = closed_form_p0_p1(prep.scenario.link_am(), &prep.scenario.fading_am, t, prep.session.mallory_power_dbm)
        .unwrap()
        .p1;
    let o1: Vec<_> = out
        .attack
        .unwrap()
        .records
        .into_iter()
        .filter(|r| r.kind == OpportunityKind::O1)
        .collect();
    let n = o1.len() as f64;
    let landed = o1.iter().filter(|r| r.landed).count() as f64;
    let rate = landed / n;
    let tol = 3.0 * (tail * (1.0 - tail) / n).sqrt();
    let expected_given_state: f64 = o1.iter().map(|r| r.state_tail_probability.unwrap()).sum();
    let spread: f64 = o1
        .iter()
        .map(|r| r.state_tail_probability.unwrap())
        .map(|p| p * (1.0 - p))
        .sum();
    let z_state = (landed - expected_given_state) / spread.sqrt();
    outcome(
        o1.len() >= 100_000 && (rate - tail).abs() <= tol,
        format!(
            "{} O1 attacks, success {rate:.5} vs tail {tail:.5} (tol {tol:.5}); given held state z = {z_state:.2}",
            o1.len()
        ),
    )
}

fn oakg_baseline() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for d in [2.0, 3.0] {
        let run = |scheme: Scheme| {
            let mut cfg = reference();
            cfg.scheme = scheme;
            cfg.adversary.d = d;
            cfg.session.rounds = 100_000;
            cfg.session.noise_sigma_db = 0.0;
            run_experiment(&cfg).unwrap().report.attack.unwrap()
        };
        let ra = run(Scheme::Rakg);
        let oa = run(Scheme::Oakg);
        let (kre_r, krr_r) = (ra.kre.unwrap_or(f64::NAN), ra.krr.unwrap());
        let (kre_o, krr_o) = (oa.kre.unwrap_or(f64::NAN), oa.krr.unwrap());
        let pass = kre_o == 1.0 && krr_o > krr_r && kre_r < 0.6 * kre_o && krr_r < 0.5 * krr_o;
        ok &= pass;
        lines.push(format!(
            "d={d}: KRE {kre_r:.4} vs {kre_o:.4}, KRR {krr_r:.4} vs {krr_o:.4}"
        ));
    }
    outcome(ok, lines.join("; "))
}

/// Correct-guess count distribution by enumerating every success pattern.
fn enumerate_pmf(n: u64, n0: u64, p0: f64, p1: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    for pattern in 0u32..(1 << n) {
        let mut prob = 1.0;
        for bit in 0..n {
            let p = if bit < n0 { p0 } else { p1 };
            prob *= if pattern >> bit & 1 == 1 { p } else { 1.0 - p };
        }
        pmf[pattern.count_ones() as usize] += prob;
    }
    pmf
}

fn pmf_matches_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut worst_mean = 0.0f64;
    for n in 0..=12u64 {
        for _ in 0..20 {
            let n0 = rng.random_range(0..=n);
            let p0: f64 = rng.random();
            let p1: f64 = rng.random();
            let pmf = guess_count_pmf(n, n0, p0, p1).unwrap();
            let oracle = enumerate_pmf(n, n0, p0, p1);
            for (a, b) in pmf.iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
            if n > 0 {
                let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let kre = expected_rates(n, n0, p0, p1, n).unwrap().kre.unwrap();
                worst_mean = worst_mean.max((mean / n as f64 - kre).abs());
            }
        }
    }
    outcome(
        worst <= 1e-12 && worst_mean <= 1e-12,
        format!("max pmf error {worst:.2e}, max mean error {worst_mean:.2e}"),
    )
}

fn expected_rate_fixture() -> Outcome {
    // attacked rounds split by guessed bit, and the resulting key length
    let (n0, n1, ell) = (399_882u64, 1_194_619u64, 36_168_113u64);
    let r = expected_rates(n0 + n1, n0, 0.65, 0.37, ell).unwrap();
    let kre = r.kre.unwrap() * 100.0;
    let krr = r.krr * 100.0;
    outcome(
        (kre - 35.16).abs() <= 0.05 && (krr - 3.49).abs() <= 0.05,
        format!("E[KRE] {kre:.2}% (target 35.16%), E[KRR] {krr:.2}% (target 3.49%)"),
    )
}

fn random_guess_dominates() -> Outcome {
    let a = analyze(&reference()).unwrap();
    let g = a.analysis.key_guess;
    let on_run = !g.beats_random && !g.beats_random_by_ratio;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut disagreements = 0;
    for _ in 0..1000 {
        let ell = rng.random_range(1..=1_000_000u64);
        let n = rng.random_range(0..=ell.min(200_000));
        let n0 = rng.random_range(0..=n);
        let (p0, p1): (f64, f64) = (rng.random(), rng.random());
        let k = key_guess_probability(ell, n, n0, p0, p1).unwrap();
        if k.beats_random != k.beats_random_by_ratio {
            disagreements += 1;
        }
    }
    outcome(
        on_run && disagreements == 0,
        format!(
            "run: log10 p_key {:.1}, beats random {} / {}; {disagreements} disagreements in 1000 draws",
            a.log10_p_key, g.beats_random, g.beats_random_by_ratio
        ),
    )
}

fn reconciliation_contract() -> Outcome {
    let params = RsParams { m: 4, n: 15, k: 11 };
    let code = ReedSolomon::new(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bits = params.codeword_bits();
    let corrupt = |s: &mut [u8], symbols: usize, rng: &mut ChaCha8Rng| {
        for sym in rand::seq::index::sample(rng, params.n, symbols) {
            // a nonzero flip pattern within the symbol
            let mask = rng.random_range(1..16u8);
            for b in 0..4 {
                s[sym * 4 + b] ^= (mask >> (3 - b)) & 1;
            }
        }
    };
    let (mut recovered, mut flagged) = (0, 0);
    for trial in 0..1000 {
        let s_a: Vec<u8> = (0..bits).map(|_| rng.random_range(0..=1)).collect();
        let (c, _) = commit(&s_a, &code, &mut rng).unwrap();
        let mut s_b = s_a.clone();
        corrupt(&mut s_b, trial % 3, &mut rng);
        if open(&s_b, &c, &code).unwrap() == Ok(s_a.clone()) {
            recovered += 1;
        }
        let mut s_b = s_a.clone();
        corrupt(&mut s_b, 3, &mut rng);
        if open(&s_b, &c, &code).unwrap().is_err() {
            flagged += 1;
        }
    }
    outcome(
        recovered == 1000 && flagged == 1000,
        format!("{recovered}/1000 recovered with <= 2 bad symbols, {flagged}/1000 flagged with 3"),
    )
}

fn zero_noise_reciprocity() -> Outcome {
    let mut mismatched = Vec::new();
    for scheme in [Scheme::Rakg, Scheme::Oakg] {
        for seed in 0..10 {
            let mut cfg = reference();
            cfg.scheme = scheme;
            cfg.seed = seed;
            cfg.adversary.enabled = false;
            cfg.session.rounds = 20_000;
            let out = run_experiment(&cfg).unwrap();
            if out.quantization.s_a != out.quantization.s_b || out.report.bit_mismatch_rate != 0.0 {
                mismatched.push((scheme, seed));
            }
        }
    }
    outcome(mismatched.is_empty(), format!("20 runs, mismatched: {mismatched:?}"))
}

fn randomness_pattern() -> Outcome {
    let run = |scheme: Scheme| {
        let mut cfg = reference();
        cfg.scheme = scheme;
        cfg.adversary.enabled = false;
        cfg.session.rounds = 1_400_000;
        run_experiment(&cfg).unwrap().report.randomness
    };
    let ra = run(Scheme::Rakg);
    let oa = run(Scheme::Oakg);
    let p = |t: rakg_core::randomness::TestOutcome| t.p_value.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    let oa_fails = oa.monobit.passed() == Some(false) || oa.block_frequency.passed() == Some(false);
    outcome(
        ra.bits >= 1_000_000 && ra.all_passed() && oa_fails,
        format!(
            "RAKG {} bits: monobit {}, block {}, runs {}, apen {}; OAKG {} bits: monobit {}, block {}",
            ra.bits,
            p(ra.monobit),
            p(ra.block_frequency),
            p(ra.runs),
            p(ra.approximate_entropy),
            oa.bits,
            p(oa.monobit),
            p(oa.block_frequency)
        ),
    )
}

/// Modified Bessel I0 by its power series.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// `∫_b^∞ x e^{-(x²+a²)/2} I0(a x) dx` by composite Simpson.
fn marcum_by_quadrature(a: f64, b: f64) -> f64 {
    let upper = b.max(a) + 40.0;
    let steps = 200_000;
    let h = (upper - b) / steps as f64;
    let f = |x: f64| x * (-(x * x + a * a) / 2.0).exp() * bessel_i0(a * x);
    let mut s = f(b) + f(upper);
    for i in 1..steps {
        s += f(b + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn marcum_q_values() -> Outcome {
    let at_zero = [0.0, 0.5, 1.0, 3.0, 10.0].iter().all(|&a| marcum_q1(a, 0.0) == 1.0);
    let worst = (1..=50)
        .map(|i| {
            let b = i as f64 / 10.0;
            (marcum_q1(0.0, b) - (-b * b / 2.0).exp()).abs()
        })
        .fold(0.0, f64::max);
    let oracle = marcum_by_quadrature(1.0, 1.0);
    let q11 = marcum_q1(1.0, 1.0);
    outcome(
        at_zero && worst <= 1e-10 && (q11 - oracle).abs() <= 1e-8,
        format!("Q1(a,0)=1: {at_zero}; max |Q1(0,b) - exp| {worst:.1e}; Q1(1,1) {q11:.10} vs quadrature {oracle:.10}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("closed-form tails match Monte Carlo", closed_form_matches_monte_carlo, Duration::from_secs(120)),
        ("attack success independent of the opportunity", success_independent_of_opportunity, Duration::from_secs(300)),
        ("omnidirectional baseline", oakg_baseline, Duration::MAX),
        ("guess-count pmf matches enumeration", pmf_matches_enumeration, Duration::MAX),
        ("expected-rate fixture", expected_rate_fixture, Duration::MAX),
        ("random guessing dominates", random_guess_dominates, Duration::MAX),
        ("reconciliation contract", reconciliation_contract, Duration::from_secs(30)),
        ("zero-noise reciprocity", zero_noise_reciprocity, Duration::MAX),
        ("randomness pattern", randomness_pattern, Duration::MAX),
        ("Marcum Q values", marcum_q_values, Duration::MAX),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        if elapsed > *budget {
            o.passed = false;
            o.detail.push_str(&format!("; over the {budget:?} budget"));
        }
        println!(
            "criterion {:>2} {}: {} ({:.1}s) {}",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            o.detail
        );
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
