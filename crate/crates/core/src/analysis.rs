//! Closed-form security analysis of the injection attack against a
//! mode-randomized link.
//!
//! Under mode `u`, the Mallory–Alice amplitude is Rician with noncentrality
//! `ν(u) = g(u, θ0)·|μ0|` and scale `ς(u) = σ0·sqrt(Σ g(u, θl)²)`. A guess
//! made on the previous round succeeds when the injected strength at Alice
//! lands on the guessed side of the threshold, so the per-bit success
//! probabilities are mode averages of Marcum-Q tails.

use serde::{Deserialize, Serialize};

use crate::antenna::{AntennaProfile, ModeId};
use crate::channel::{FadingParams, LinkGains};
use crate::error::{Error, Result};
use crate::geometry::LinkPathSet;
use crate::quantize::Thresholds;
use crate::special::{laguerre_half, marcum_q1};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianModeParams {
    pub nu: f64,
    pub varsigma: f64,
}

impl RicianModeParams {
    pub fn mean_amplitude(&self) -> f64 {
        let ratio = self.nu / self.varsigma;
        self.varsigma * (std::f64::consts::PI / 2.0).sqrt() * laguerre_half(-ratio * ratio / 2.0)
    }

    /// `P(|h| > r)`.
    pub fn tail(&self, r: f64) -> f64 {
        marcum_q1(self.nu / self.varsigma, r / self.varsigma)
    }

    /// `P(|h| <= r)`.
    pub fn cdf(&self, r: f64) -> f64 {
        1.0 - self.tail(r)
    }
}

/// Rician parameters of `Σ g_l a_l` for the given per-path gains.
pub fn rician_from_gains(gains: &[f64], fading: &FadingParams) -> Result<RicianModeParams> {
    let Some(&los_gain) = gains.first() else {
        return Err(Error::Contract("at least one path is required".into()));
    };
    let energy: f64 = gains.iter().map(|g| g * g).sum();
    let varsigma = fading.sigma0 * energy.sqrt();
    if varsigma <= 0.0 {
        return Err(Error::Degenerate("mode has zero gain on every path".into()));
    }
    Ok(RicianModeParams {
        nu: los_gain * fading.los_mean.norm(),
        varsigma,
    })
}

pub fn rician_params(
    profile: &AntennaProfile,
    mode: ModeId,
    fading: &FadingParams,
    paths: &LinkPathSet,
) -> Result<RicianModeParams> {
    let idx = profile.mode_index(mode).ok_or(Error::UnknownMode(mode.0))?;
    let gains: Vec<f64> = paths.angles.iter().map(|&a| profile.gain_at(idx, a)).collect();
    rician_from_gains(&gains, fading)
}

/// Amplitude at which `20·log10|h| + power_dbm` equals `threshold_dbm`.
pub fn amplitude_threshold(threshold_dbm: f64, power_dbm: f64) -> f64 {
    10f64.powf((threshold_dbm - power_dbm) / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessSuccess {
    /// Probability that an O0 guess (bit 0) lands below the lower threshold.
    pub p0: f64,
    /// Probability that an O1 guess (bit 1) lands above the upper threshold.
    pub p1: f64,
    /// Modes that entered the average.
    pub modes_used: usize,
}

/// Mode-averaged success probabilities of both guess types for an injection
/// at `power_dbm` over the Mallory–Alice link.
///
/// Modes with zero gain on every path are left out of the average.
pub fn closed_form_p0_p1(
    link: &LinkGains,
    fading: &FadingParams,
    thresholds: Thresholds,
    power_dbm: f64,
) -> Result<GuessSuccess> {
    let r_lo = amplitude_threshold(thresholds.lower, power_dbm);
    let r_hi = amplitude_threshold(thresholds.upper, power_dbm);
    let mut p0 = 0.0;
    let mut p1 = 0.0;
    let mut used = 0usize;
    for u in 0..link.mode_count() {
        let params = match rician_from_gains(link.mode(u), fading) {
            Ok(p) => p,
            Err(Error::Degenerate(_)) => {
                log::warn!("mode index {u} has zero gain towards mallory; excluded");
                continue;
            }
            Err(e) => return Err(e),
        };
        p0 += params.cdf(r_lo);
        p1 += params.tail(r_hi);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate("no usable antenna modes".into()));
    }
    Ok(GuessSuccess {
        p0: p0 / used as f64,
        p1: p1 / used as f64,
        modes_used: used,
    })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    use statrs::function::factorial::ln_factorial;
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let ln_terms = |count: u64, prob: f64| {
                if count == 0 {
                    0.0
                } else if prob == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    count as f64 * prob.ln()
                }
            };
            (ln_choose(n, k) + ln_terms(k, p) + ln_terms(n - k, 1.0 - p)).exp()
        })
        .collect()
}

fn check_counts(n: u64, n0: u64, p0: f64, p1: f64) -> Result<()> {
    if n0 > n {
        return Err(Error::Contract(format!("n0 = {n0} exceeds n = {n}")));
    }
    for (name, p) in [("p0", p0), ("p1", p1)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Contract(format!("{name} = {p} outside [0, 1]")));
        }
    }
    Ok(())
}

/// PMF of the number of correct guesses among `n` attacked bits, `n0` of
/// which were guessed as 0.
///
/// The guesses are independent, so the count is the convolution of
/// `Binomial(n0, p0)` and `Binomial(n - n0, p1)`.
pub fn guess_count_pmf(n: u64, n0: u64, p0: f64, p1: f64) -> Result<Vec<f64>> {
    check_counts(n, n0, p0, p1)?;
    let zeros = binomial_pmf(n0, p0);
    let ones = binomial_pmf(n - n0, p1);
    let mut pmf = vec![0.0; (n + 1) as usize];
    for (i, a) in zeros.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in ones.iter().enumerate() {
            pmf[i + j] += a * b;
        }
    }
    Ok(pmf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    /// Absent when no bit was attacked.
    pub kre: Option<f64>,
    pub krr: f64,
}

pub fn expected_rates(n: u64, n0: u64, p0: f64, p1: f64, ell: u64) -> Result<ExpectedRates> {
    check_counts(n, n0, p0, p1)?;
    if ell == 0 {
        return Err(Error::Contract("key length must be positive".into()));
    }
    let expected_hits = n0 as f64 * p0 + (n - n0) as f64 * p1;
    Ok(ExpectedRates {
        kre: (n > 0).then(|| expected_hits / n as f64),
        krr: expected_hits / ell as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyGuess {
    /// Natural log of the probability of guessing the whole key.
    pub ln_p_key: f64,
    pub log10_p_key: f64,
    /// `ln_p_key > ℓ·ln 0.5`.
    pub beats_random: bool,
    /// Same decision from the count-ratio condition.
    pub beats_random_by_ratio: bool,
    /// `n0 / (n - n0)`; infinite when every attacked bit is an O0 guess.
    pub ratio: Option<f64>,
    /// `(ln 0.5 - ln p1) / (ln p0 - ln 0.5)`.
    pub ratio_bound: Option<f64>,
}

impl KeyGuess {
    pub fn p_key(&self) -> f64 {
        self.ln_p_key.exp()
    }
}

/// Probability that Mallory's assembled guess equals the whole key: attacked
/// bits succeed with `p0`/`p1`, the remaining `ℓ - n` bits are coin flips.
pub fn key_guess_probability(ell: u64, n: u64, n0: u64, p0: f64, p1: f64) -> Result<KeyGuess> {
    check_counts(n, n0, p0, p1)?;
    if n > ell {
        return Err(Error::Contract(format!("n = {n} exceeds key length {ell}")));
    }
    let n1 = n - n0;
    let half = 0.5f64.ln();
    let term = |count: u64, p: f64| {
        if count == 0 {
            0.0
        } else if p == 0.0 {
            f64::NEG_INFINITY
        } else {
            count as f64 * p.ln()
        }
    };
    let ln_p_key = (ell - n) as f64 * half + term(n0, p0) + term(n1, p1);
    let beats_random = ln_p_key > ell as f64 * half;

    let (ratio, ratio_bound, beats_random_by_ratio) = ratio_condition(n0, n1, p0, p1);
    Ok(KeyGuess {
        ln_p_key,
        log10_p_key: ln_p_key / std::f64::consts::LN_10,
        beats_random,
        beats_random_by_ratio,
        ratio,
        ratio_bound,
    })
}

/// Evaluates `n0/(n−n0) > (ln 0.5 − ln p1)/(ln p0 − ln 0.5)`, flipping the
/// comparison when `ln p0 − ln 0.5` is negative.
fn ratio_condition(n0: u64, n1: u64, p0: f64, p1: f64) -> (Option<f64>, Option<f64>, bool) {
    let half = 0.5f64.ln();
    let ratio = (n1 > 0).then(|| n0 as f64 / n1 as f64);
    let denom = p0.ln() - half;
    let numer = half - p1.ln();
    let bound = (denom != 0.0 && denom.is_finite() && numer.is_finite()).then(|| numer / denom);
    let beats = match (n0, n1) {
        (0, 0) => false,
        (_, 0) => denom > 0.0,
        (0, _) => numer < 0.0,
        _ => match (ratio, bound) {
            (Some(r), Some(b)) if denom > 0.0 => r > b,
            (Some(r), Some(b)) => r < b,
            // p0 = 1/2 (or 0): only the O1 share decides
            _ if denom == 0.0 => numer < 0.0,
            // p0 = 0 or p1 = 0 with both counts positive
            _ => false,
        },
    };
    (ratio, bound, beats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub p0: f64,
    pub p1: f64,
    pub n: u64,
    pub n0: u64,
    pub ell: u64,
    /// Omitted for large `n`.
    pub pmf: Option<Vec<f64>>,
    pub e_kre: Option<f64>,
    pub e_krr: f64,
    pub key_guess: KeyGuess,
}

/// Largest `n` for which the full PMF is materialized.
pub const PMF_LIMIT: u64 = 20_000;

pub fn analyze_counts(p: GuessSuccess, n: u64, n0: u64, ell: u64) -> Result<AnalysisResult> {
    let rates = expected_rates(n, n0, p.p0, p.p1, ell)?;
    let key_guess = key_guess_probability(ell, n, n0, p.p0, p.p1)?;
    let pmf = if n <= PMF_LIMIT {
        Some(guess_count_pmf(n, n0, p.p0, p.p1)?)
    } else {
        None
    };
    Ok(AnalysisResult {
        p0: p.p0,
        p1: p.p1,
        n,
        n0,
        ell,
        pmf,
        e_kre: rates.kre,
        e_krr: rates.krr,
        key_guess,
    })
}
