//! Wait-then-attack injection adversary.
//!
//! Mallory watches both probes of a round. When they are close to each other
//! and on the same side of the quantization thresholds she jams the next
//! round, injects her own probes and guesses the bit it will yield.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quantize::{Bitstream, Thresholds};
use crate::session::MeasurementTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    /// Largest RSS difference between the two observed probes, in dB.
    pub d: f64,
    /// Also attack the round after an injection, reusing the same observation.
    pub repeat_injection: bool,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            d: 3.0,
            repeat_injection: false,
        }
    }
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::Validation(format!("d must be positive, got {}", self.d)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpportunityKind {
    O0,
    O1,
}

impl OpportunityKind {
    pub fn guessed_bit(self) -> u8 {
        match self {
            OpportunityKind::O0 => 0,
            OpportunityKind::O1 => 1,
        }
    }

    /// Whether `x` lies strictly on this opportunity's side of `t`.
    pub fn beyond(self, x: f64, t: Thresholds) -> bool {
        match self {
            OpportunityKind::O0 => x < t.lower,
            OpportunityKind::O1 => x > t.upper,
        }
    }
}

pub fn detect_opportunity(rss_ma: f64, rss_mb: f64, t: Thresholds, d: f64) -> Option<OpportunityKind> {
    // NaN (both erased) and infinite differences fail this test
    if !((rss_ma - rss_mb).abs() < d) {
        return None;
    }
    if rss_ma > t.upper && rss_mb > t.upper {
        Some(OpportunityKind::O1)
    } else if rss_ma < t.lower && rss_mb < t.lower {
        Some(OpportunityKind::O0)
    } else {
        None
    }
}

/// `P(rss + ε beyond the guessed threshold)` with `ε ~ N(0, sigma²)`.
pub fn landing_probability(rss: f64, sigma: f64, kind: OpportunityKind, t: Thresholds) -> f64 {
    if !rss.is_finite() {
        // an erased probe never quantizes
        return 0.0;
    }
    if sigma == 0.0 {
        return if kind.beyond(rss, t) { 1.0 } else { 0.0 };
    }
    let z = match kind {
        OpportunityKind::O1 => (rss - t.upper) / sigma,
        OpportunityKind::O0 => (t.lower - rss) / sigma,
    };
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// What Alice and Bob measure when Mallory replaces a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub x_a: f64,
    pub x_b: f64,
    /// Chance, given the held channel state, that a uniformly drawn mode
    /// puts Alice's measurement on the guessed side. Unknown for replays.
    pub state_tail_probability: Option<f64>,
}

/// Source of the measurements an injection produces.
pub trait InjectionChannel {
    fn inject(&mut self, opportunity_round: usize, attack_round: usize, kind: OpportunityKind, t: Thresholds) -> Injection;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub opportunity_round: usize,
    pub round: usize,
    pub kind: OpportunityKind,
    pub guessed: u8,
    pub injected_x_a: f64,
    pub injected_x_b: f64,
    /// Alice's injected measurement fell on the guessed side of Mallory's
    /// thresholds.
    pub landed: bool,
    pub state_tail_probability: Option<f64>,
    pub survived_to_key: bool,
    pub alice_bit: Option<u8>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub d: f64,
    pub records: Vec<AttackRecord>,
    /// Attacked rounds that yielded a key bit.
    pub n: u64,
    /// O0 attacks among them.
    pub n0: u64,
    /// Correct guesses among them.
    pub m: u64,
    /// Attacked rounds that did not yield a key bit.
    pub not_quantized: u64,
}

impl AttackTrace {
    pub fn empty(d: f64) -> Self {
        Self {
            d,
            records: Vec::new(),
            n: 0,
            n0: 0,
            m: 0,
            not_quantized: 0,
        }
    }

    pub fn n1(&self) -> u64 {
        self.n - self.n0
    }

    /// Resolves every record against Alice's final bitstream and recomputes
    /// the totals.
    pub fn settle(&mut self, s_a: &Bitstream) {
        self.n = 0;
        self.n0 = 0;
        self.m = 0;
        self.not_quantized = 0;
        for r in &mut self.records {
            let bit = s_a
                .source_rounds
                .binary_search(&r.round)
                .ok()
                .map(|i| s_a.bits[i]);
            r.survived_to_key = bit.is_some();
            r.alice_bit = bit;
            r.correct = bit == Some(r.guessed);
            if r.survived_to_key {
                self.n += 1;
                if r.kind == OpportunityKind::O0 {
                    self.n0 += 1;
                }
                if r.correct {
                    self.m += 1;
                }
            } else {
                self.not_quantized += 1;
            }
        }
    }
}

/// Scans the trace round by round, injecting after every opportunity.
///
/// Attacked rounds are overwritten in `trace` and flagged. Mallory cannot
/// listen while jamming, so observation resumes after the last attacked
/// round. Totals stay zero until [`AttackTrace::settle`].
pub fn run_attack<C: InjectionChannel + ?Sized>(
    trace: &mut MeasurementTrace,
    t: Thresholds,
    cfg: &AdversaryConfig,
    channel: &mut C,
) -> Result<AttackTrace> {
    cfg.validate()?;
    trace.check()?;
    let n = trace.len();
    let mut out = AttackTrace::empty(cfg.d);
    let mut i = 0;
    while i + 1 < n {
        let Some(kind) = detect_opportunity(trace.rss_ma[i], trace.rss_mb[i], t, cfg.d) else {
            i += 1;
            continue;
        };
        let shots = if cfg.repeat_injection { 2 } else { 1 };
        let mut next = i + 1;
        for round in (i + 1..n).take(shots) {
            let inj = channel.inject(i, round, kind, t);
            trace.x_a[round] = inj.x_a;
            trace.x_b[round] = inj.x_b;
            trace.injected[round] = true;
            out.records.push(AttackRecord {
                opportunity_round: i,
                round,
                kind,
                guessed: kind.guessed_bit(),
                injected_x_a: inj.x_a,
                injected_x_b: inj.x_b,
                landed: kind.beyond(inj.x_a, t),
                state_tail_probability: inj.state_tail_probability,
                survived_to_key: false,
                alice_bit: None,
                correct: false,
            });
            next = round + 1;
        }
        i = next;
    }
    Ok(out)
}

/// Mallory's guess of Alice's whole bitstream: attacked positions carry the
/// recorded guess, the rest are fair coin flips.
pub fn assemble_guess<R: Rng + ?Sized>(attack: &AttackTrace, key_rounds: &[usize], rng: &mut R) -> Result<Bitstream> {
    let mut by_round: Vec<(usize, u8)> = attack.records.iter().map(|r| (r.round, r.guessed)).collect();
    by_round.sort_unstable();
    let bits = key_rounds
        .iter()
        .map(|round| match by_round.binary_search_by_key(round, |&(r, _)| r) {
            Ok(i) => by_round[i].1,
            Err(_) => rng.random_range(0..=1u8),
        })
        .collect();
    Bitstream::new(bits, key_rounds.to_vec())
}
