//! Session-level metrics: attack efficiency, bit agreement and the secret
//! bit rate.

use serde::{Deserialize, Serialize};

use crate::adversary::AttackTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    /// Correct guesses per attacked key bit; absent when nothing was attacked.
    pub kre: Option<f64>,
    /// Correct guesses per key bit.
    pub krr: f64,
}

pub fn attack_metrics(attack: &AttackTrace, ell: u64) -> Result<AttackMetrics> {
    if ell == 0 {
        return Err(Error::Contract("key length must be positive".into()));
    }
    Ok(AttackMetrics {
        kre: (attack.n > 0).then(|| attack.m as f64 / attack.n as f64),
        krr: attack.m as f64 / ell as f64,
    })
}

/// Hamming distance over length; zero for empty streams.
pub fn bit_mismatch_rate(s_a: &[u8], s_b: &[u8]) -> Result<f64> {
    if s_a.len() != s_b.len() {
        return Err(Error::Contract(format!(
            "bitstreams differ in length: {} vs {}",
            s_a.len(),
            s_b.len()
        )));
    }
    if s_a.is_empty() {
        return Ok(0.0);
    }
    let diff = s_a.iter().zip(s_b).filter(|(a, b)| a != b).count();
    Ok(diff as f64 / s_a.len() as f64)
}

/// `(reconciled − guessed − parity) / rounds`, floored at zero.
pub fn secret_bit_rate(reconciled_bits: usize, guessed_bits: usize, parity_bits: usize, rounds: usize) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::Contract("rounds must be positive".into()));
    }
    let kept = reconciled_bits as f64 - guessed_bits as f64 - parity_bits as f64;
    Ok(kept.max(0.0) / rounds as f64)
}
