//! Four statistical tests from the NIST SP 800-22 suite: frequency
//! (monobit), block frequency, runs and approximate entropy.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

pub const PASS_LEVEL: f64 = 0.01;
pub const BLOCK_FREQUENCY_M: usize = 128;
const MIN_BITS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// Absent when the input is too short for the test.
    pub p_value: Option<f64>,
}

impl TestOutcome {
    fn applicable(p: f64) -> Self {
        Self {
            p_value: Some(p.clamp(0.0, 1.0)),
        }
    }

    fn not_applicable() -> Self {
        Self { p_value: None }
    }

    pub fn passed(&self) -> Option<bool> {
        self.p_value.map(|p| p >= PASS_LEVEL)
    }
}

pub fn monobit(bits: &[u8]) -> TestOutcome {
    let n = bits.len();
    if n < MIN_BITS {
        return TestOutcome::not_applicable();
    }
    let ones = bits.iter().filter(|&&b| b == 1).count() as f64;
    let s = 2.0 * ones - n as f64;
    TestOutcome::applicable(erfc(s.abs() / (2.0 * n as f64).sqrt()))
}

pub fn block_frequency(bits: &[u8], block_len: usize) -> TestOutcome {
    let n = bits.len();
    if n < MIN_BITS || block_len == 0 || n < block_len {
        return TestOutcome::not_applicable();
    }
    let blocks = n / block_len;
    let chi2: f64 = bits
        .chunks_exact(block_len)
        .map(|c| {
            let pi = c.iter().filter(|&&b| b == 1).count() as f64 / block_len as f64;
            (pi - 0.5) * (pi - 0.5)
        })
        .sum::<f64>()
        * 4.0
        * block_len as f64;
    TestOutcome::applicable(gamma_ur(blocks as f64 / 2.0, chi2 / 2.0))
}

/// Fails outright (p = 0) when the frequency prerequisite is not met.
pub fn runs(bits: &[u8]) -> TestOutcome {
    let n = bits.len();
    if n < MIN_BITS {
        return TestOutcome::not_applicable();
    }
    let nf = n as f64;
    let pi = bits.iter().filter(|&&b| b == 1).count() as f64 / nf;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return TestOutcome::applicable(0.0);
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let spread = pi * (1.0 - pi);
    let num = (v as f64 - 2.0 * nf * spread).abs();
    TestOutcome::applicable(erfc(num / (2.0 * (2.0 * nf).sqrt() * spread)))
}

/// `Σ C_i ln C_i` over the relative frequencies of all cyclic `m`-bit windows.
fn phi(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u64; 1 << m];
    let mut window = 0usize;
    for i in 0..m - 1 {
        window = (window << 1) | bits[i] as usize;
    }
    for i in 0..n {
        window = ((window << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[window] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * p.ln()
        })
        .sum()
}

/// `Φ(m) − Φ(m+1)` with cyclic windows.
pub fn approximate_entropy(bits: &[u8], m_block: usize) -> Result<f64> {
    if m_block > 24 {
        return Err(Error::Contract(format!("block length {m_block} too large")));
    }
    if bits.len() < 1 << (m_block + 1) {
        return Err(Error::Contract(format!(
            "approximate entropy with m = {m_block} needs at least {} bits, got {}",
            1usize << (m_block + 1),
            bits.len()
        )));
    }
    Ok(phi(bits, m_block) - phi(bits, m_block + 1))
}

/// Block length used by the approximate-entropy test for `n` bits.
pub fn apen_test_block_len(n: usize) -> usize {
    let log2 = (usize::BITS - 1 - n.max(1).leading_zeros()) as i64;
    (log2 - 6).clamp(1, 10) as usize
}

pub fn approximate_entropy_test(bits: &[u8]) -> TestOutcome {
    let n = bits.len();
    if n < MIN_BITS {
        return TestOutcome::not_applicable();
    }
    let m = apen_test_block_len(n);
    let Ok(apen) = approximate_entropy(bits, m) else {
        return TestOutcome::not_applicable();
    };
    let chi2 = 2.0 * n as f64 * (std::f64::consts::LN_2 - apen);
    TestOutcome::applicable(gamma_ur((1u64 << (m - 1)) as f64, (chi2 / 2.0).max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomnessReport {
    pub bits: usize,
    pub monobit: TestOutcome,
    pub block_frequency: TestOutcome,
    pub runs: TestOutcome,
    pub approximate_entropy: TestOutcome,
    /// Approximate entropy at block length 2, as a descriptive metric.
    pub apen: Option<f64>,
}

impl RandomnessReport {
    pub fn all_passed(&self) -> bool {
        [self.monobit, self.block_frequency, self.runs, self.approximate_entropy]
            .iter()
            .all(|t| t.passed() == Some(true))
    }
}

pub fn randomness_tests(bits: &[u8]) -> RandomnessReport {
    RandomnessReport {
        bits: bits.len(),
        monobit: monobit(bits),
        block_frequency: block_frequency(bits, BLOCK_FREQUENCY_M),
        runs: runs(bits),
        approximate_entropy: approximate_entropy_test(bits),
        apen: approximate_entropy(bits, 2).ok(),
    }
}
