//! Two-threshold RSS quantization and index-list exchange.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    pub beta: f64,
    pub excursion_len: usize,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            beta: 0.4,
            excursion_len: 1,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Validation(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if self.excursion_len == 0 {
            return Err(Error::Validation("excursion length must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lower: f64,
    pub upper: f64,
}

impl Thresholds {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Strictly above the upper or strictly below the lower threshold;
    /// erasures never qualify.
    pub fn is_excursion(&self, x: f64) -> bool {
        x.is_finite() && (x > self.upper || x < self.lower)
    }
}

/// `mean ± beta·std` over the finite entries of `x` (population std).
pub fn thresholds(x: &[f64], beta: f64) -> Result<Thresholds> {
    let mut count = 0usize;
    let mut sum = 0.0;
    for &v in x.iter().filter(|v| v.is_finite()) {
        count += 1;
        sum += v;
    }
    if count < 2 {
        return Err(Error::Degenerate(format!(
            "{count} finite samples; thresholds need at least 2"
        )));
    }
    let mean = sum / count as f64;
    let var = x
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count as f64;
    let spread = beta * var.sqrt();
    Ok(Thresholds {
        lower: mean - spread,
        upper: mean + spread,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Above,
    Below,
    Inside,
}

fn side(x: f64, t: Thresholds) -> Side {
    if !x.is_finite() {
        Side::Inside
    } else if x > t.upper {
        Side::Above
    } else if x < t.lower {
        Side::Below
    } else {
        Side::Inside
    }
}

/// Indices of excursions; for `e > 1`, the start of every maximal same-side
/// run of length at least `e`.
pub fn find_excursions(x: &[f64], t: Thresholds, e: usize) -> Vec<usize> {
    if e <= 1 {
        return (0..x.len()).filter(|&i| t.is_excursion(x[i])).collect();
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < x.len() {
        let s = side(x[i], t);
        let mut j = i + 1;
        while j < x.len() && side(x[j], t) == s {
            j += 1;
        }
        if s != Side::Inside && j - i >= e {
            out.push(i);
        }
        i = j;
    }
    out
}

/// Keeps the indices of `l_a` at which `x_b` also has an excursion, on either
/// side. With `e > 1` the excursion must span `e` rounds starting there.
pub fn confirm_excursions(x_b: &[f64], l_a: &[usize], t: Thresholds, e: usize) -> Result<Vec<usize>> {
    let e = e.max(1);
    let mut out = Vec::with_capacity(l_a.len());
    for &i in l_a {
        if i >= x_b.len() {
            return Err(Error::Protocol(format!(
                "index {i} out of range for a series of {} rounds",
                x_b.len()
            )));
        }
        let s = side(x_b[i], t);
        if s == Side::Inside || i + e > x_b.len() {
            continue;
        }
        if x_b[i..i + e].iter().all(|&v| side(v, t) == s) {
            out.push(i);
        }
    }
    Ok(out)
}

/// Bits with the round each one came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitstream {
    pub bits: Vec<u8>,
    pub source_rounds: Vec<usize>,
}

impl Bitstream {
    pub fn new(bits: Vec<u8>, source_rounds: Vec<usize>) -> Result<Self> {
        if bits.len() != source_rounds.len() {
            return Err(Error::Contract(format!(
                "{} bits but {} source rounds",
                bits.len(),
                source_rounds.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Contract("bit values must be 0 or 1".into()));
        }
        if source_rounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("source rounds must be strictly increasing".into()));
        }
        Ok(Self { bits, source_rounds })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// 1 above the upper threshold, 0 below the lower one.
pub fn quantize(x: &[f64], indices: &[usize], t: Thresholds) -> Result<Bitstream> {
    let mut bits = Vec::with_capacity(indices.len());
    for &i in indices {
        let v = *x.get(i).ok_or_else(|| {
            Error::Contract(format!("index {i} out of range for {} rounds", x.len()))
        })?;
        bits.push(match side(v, t) {
            Side::Above => 1,
            Side::Below => 0,
            Side::Inside => {
                return Err(Error::Contract(format!(
                    "round {i} value {v} lies between the thresholds"
                )))
            }
        });
    }
    Bitstream::new(bits, indices.to_vec())
}

/// Both parties' view of one quantization phase.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationOutcome {
    pub alice_thresholds: Thresholds,
    pub bob_thresholds: Thresholds,
    pub l_a: Vec<usize>,
    pub l_b: Vec<usize>,
    pub s_a: Bitstream,
    pub s_b: Bitstream,
}

/// Thresholds, Alice's excursion list, Bob's confirmation and both bitstreams.
pub fn run_quantization(x_a: &[f64], x_b: &[f64], cfg: &QuantizerConfig) -> Result<QuantizationOutcome> {
    cfg.validate()?;
    if x_a.len() != x_b.len() {
        return Err(Error::Contract(format!(
            "series lengths differ: {} vs {}",
            x_a.len(),
            x_b.len()
        )));
    }
    let ta = thresholds(x_a, cfg.beta)?;
    let tb = thresholds(x_b, cfg.beta)?;
    let l_a = find_excursions(x_a, ta, cfg.excursion_len);
    let l_b = confirm_excursions(x_b, &l_a, tb, cfg.excursion_len)?;
    let s_a = quantize(x_a, &l_b, ta)?;
    let s_b = quantize(x_b, &l_b, tb)?;
    Ok(QuantizationOutcome {
        alice_thresholds: ta,
        bob_thresholds: tb,
        l_a,
        l_b,
        s_a,
        s_b,
    })
}
