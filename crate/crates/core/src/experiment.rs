//! End-to-end runs: simulate or replay a trace, quantize, settle the attack,
//! reconcile, verify and measure.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AdversaryConfig, AttackTrace, Injection, InjectionChannel, OpportunityKind};
use crate::analysis::{analyze_counts, closed_form_p0_p1, AnalysisResult, GuessSuccess};
use crate::bitio::write_bitstream;
use crate::config::{ExperimentConfig, Scheme};
use crate::error::{Error, Result};
use crate::metrics::{attack_metrics, bit_mismatch_rate, secret_bit_rate};
use crate::quantize::{run_quantization, thresholds, QuantizationOutcome, QuantizerConfig, Thresholds};
use crate::randomness::{randomness_tests, RandomnessReport};
use crate::reconcile::{reconcile, write_commitments, Reconciliation, ReedSolomon, RsParams};
use crate::session::{simulate_session, stream_rng, MeasurementTrace};
use crate::trace::save_trace;

const STREAM_RECONCILE: u64 = 5;

/// One attacked round as exported in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackExport {
    pub round: usize,
    pub kind: OpportunityKind,
    pub guessed: u8,
    pub correct: bool,
    pub survived_to_key: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub d: f64,
    pub attacks: usize,
    pub n: u64,
    pub n0: u64,
    pub n1: u64,
    pub m: u64,
    pub not_quantized: u64,
    pub kre: Option<f64>,
    pub krr: Option<f64>,
    /// Attempts and landings per guess type, over all attacked rounds.
    pub attempts_o0: u64,
    pub attempts_o1: u64,
    pub landed_o0: u64,
    pub landed_o1: u64,
}

impl AttackSummary {
    fn from_trace(a: &AttackTrace, ell: u64) -> Result<Self> {
        let metrics = if ell > 0 { Some(attack_metrics(a, ell)?) } else { None };
        let count = |kind: OpportunityKind, landed: bool| {
            a.records
                .iter()
                .filter(|r| r.kind == kind && (!landed || r.landed))
                .count() as u64
        };
        Ok(Self {
            d: a.d,
            attacks: a.records.len(),
            n: a.n,
            n0: a.n0,
            n1: a.n1(),
            m: a.m,
            not_quantized: a.not_quantized,
            kre: metrics.and_then(|m| m.kre),
            krr: metrics.map(|m| m.krr),
            attempts_o0: count(OpportunityKind::O0, false),
            attempts_o1: count(OpportunityKind::O1, false),
            landed_o0: count(OpportunityKind::O0, true),
            landed_o1: count(OpportunityKind::O1, true),
        })
    }

    /// Landing rates `(O0, O1)`; `None` without attempts.
    pub fn landing_rates(&self) -> (Option<f64>, Option<f64>) {
        let rate = |l: u64, a: u64| (a > 0).then(|| l as f64 / a as f64);
        (rate(self.landed_o0, self.attempts_o0), rate(self.landed_o1, self.attempts_o1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationSummary {
    pub params: RsParams,
    pub blocks: usize,
    pub failed_blocks: usize,
    pub reconciled_bits: usize,
    pub parity_bits: usize,
    pub verified: bool,
}

impl ReconciliationSummary {
    /// Every block opened and the derived keys agree.
    pub fn succeeded(&self) -> bool {
        self.failed_blocks == 0 && self.verified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    /// `simulate` or `replay`.
    pub source: String,
    pub scheme: Option<Scheme>,
    pub seed: u64,
    pub rounds: usize,
    pub tx_power_dbm: Option<f64>,
    pub mallory_power_dbm: Option<f64>,
    pub alice_thresholds: Thresholds,
    pub bob_thresholds: Thresholds,
    pub mallory_thresholds: Option<Thresholds>,
    pub excursions: usize,
    pub key_bits: usize,
    pub bit_mismatch_rate: f64,
    pub attack: Option<AttackSummary>,
    pub reconciliation: ReconciliationSummary,
    pub secret_bit_rate: f64,
    pub randomness: RandomnessReport,
    pub attacks: Vec<AttackExport>,
}

/// Report plus everything needed to write the artifacts.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: SessionReport,
    pub trace: MeasurementTrace,
    pub quantization: QuantizationOutcome,
    pub attack: Option<AttackTrace>,
    pub reconciliation: Reconciliation,
}

struct RunMeta {
    source: &'static str,
    scheme: Option<Scheme>,
    seed: u64,
    tx_power_dbm: Option<f64>,
    mallory_power_dbm: Option<f64>,
    mallory_thresholds: Option<Thresholds>,
}

/// Attacked key bits Mallory guessed right that ended up in an opened block.
fn guessed_in_reconciled(attack: &AttackTrace, q: &QuantizationOutcome, rec: &Reconciliation) -> usize {
    let block_bits = rec.params.codeword_bits();
    attack
        .records
        .iter()
        .filter(|r| r.correct)
        .filter_map(|r| q.s_a.source_rounds.binary_search(&r.round).ok())
        .filter(|&idx| {
            let block = idx / block_bits;
            block < rec.blocks && rec.failed_blocks.binary_search(&block).is_err()
        })
        .count()
}

fn downstream(
    trace: MeasurementTrace,
    mut attack: Option<AttackTrace>,
    quantizer: &QuantizerConfig,
    rs: RsParams,
    meta: RunMeta,
) -> Result<ExperimentOutput> {
    let q = run_quantization(&trace.x_a, &trace.x_b, quantizer).map_err(Error::at("quantize"))?;
    if let Some(a) = attack.as_mut() {
        a.settle(&q.s_a);
    }
    let ell = q.s_a.len() as u64;
    let summary = attack
        .as_ref()
        .map(|a| AttackSummary::from_trace(a, ell))
        .transpose()
        .map_err(Error::at("metrics"))?;
    let code = ReedSolomon::new(rs).map_err(Error::at("reconcile"))?;
    let mut rng = stream_rng(meta.seed, STREAM_RECONCILE);
    let rec = reconcile(&q.s_a.bits, &q.s_b.bits, &code, &mut rng).map_err(Error::at("reconcile"))?;
    let guessed = attack.as_ref().map_or(0, |a| guessed_in_reconciled(a, &q, &rec));
    let sbr = secret_bit_rate(rec.reconciled_bits(), guessed, rec.parity_bits(), trace.len().max(1))
        .map_err(Error::at("metrics"))?;
    let report = SessionReport {
        source: meta.source.into(),
        scheme: meta.scheme,
        seed: meta.seed,
        rounds: trace.len(),
        tx_power_dbm: meta.tx_power_dbm,
        mallory_power_dbm: meta.mallory_power_dbm,
        alice_thresholds: q.alice_thresholds,
        bob_thresholds: q.bob_thresholds,
        mallory_thresholds: meta.mallory_thresholds,
        excursions: q.l_a.len(),
        key_bits: q.s_a.len(),
        bit_mismatch_rate: bit_mismatch_rate(&q.s_a.bits, &q.s_b.bits).map_err(Error::at("metrics"))?,
        attack: summary,
        reconciliation: ReconciliationSummary {
            params: rs,
            blocks: rec.blocks,
            failed_blocks: rec.failed_blocks.len(),
            reconciled_bits: rec.reconciled_bits(),
            parity_bits: rec.parity_bits(),
            verified: rec.verified,
        },
        secret_bit_rate: sbr,
        randomness: randomness_tests(&q.s_a.bits),
        attacks: attack
            .iter()
            .flat_map(|a| &a.records)
            .map(|r| AttackExport {
                round: r.round,
                kind: r.kind,
                guessed: r.guessed,
                correct: r.correct,
                survived_to_key: r.survived_to_key,
            })
            .collect(),
    };
    Ok(ExperimentOutput {
        report,
        trace,
        quantization: q,
        attack,
        reconciliation: rec,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prep = cfg.prepare().map_err(Error::at("config"))?;
    let session = simulate_session(
        &prep.scenario,
        &prep.session,
        prep.adversary.as_ref(),
        prep.quantizer.beta,
        cfg.seed,
    )
    .map_err(Error::at("simulate"))?;
    let meta = RunMeta {
        source: "simulate",
        scheme: Some(cfg.scheme),
        seed: cfg.seed,
        tx_power_dbm: Some(prep.session.tx_power_dbm),
        mallory_power_dbm: Some(prep.session.mallory_power_dbm),
        mallory_thresholds: session.mallory_thresholds,
    };
    downstream(session.trace, session.attack, &prep.quantizer, prep.rs, meta)
}

/// `k` sessions with seeds `seed, seed + 1, ...`, run concurrently and
/// returned in seed order.
pub fn run_trials(cfg: &ExperimentConfig, k: usize) -> Result<Vec<SessionReport>> {
    (0..k as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(i);
            run_experiment(&c).map(|o| o.report)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsSummary {
    pub trials: usize,
    pub mean_kre: Option<f64>,
    pub mean_krr: Option<f64>,
    pub mean_bit_mismatch_rate: f64,
    pub mean_secret_bit_rate: f64,
    pub reconciliation_failures: usize,
    pub reports: Vec<SessionReport>,
}

pub fn summarize_trials(reports: Vec<SessionReport>) -> TrialsSummary {
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let kre = reports.iter().filter_map(|r| r.attack.and_then(|a| a.kre)).collect();
    let krr = reports.iter().filter_map(|r| r.attack.and_then(|a| a.krr)).collect();
    TrialsSummary {
        trials: reports.len(),
        mean_kre: mean(kre),
        mean_krr: mean(krr),
        mean_bit_mismatch_rate: mean(reports.iter().map(|r| r.bit_mismatch_rate).collect()).unwrap_or(0.0),
        mean_secret_bit_rate: mean(reports.iter().map(|r| r.secret_bit_rate).collect()).unwrap_or(0.0),
        reconciliation_failures: reports.iter().filter(|r| !r.reconciliation.succeeded()).count(),
        reports,
    }
}

/// Replayed injection: Mallory's probe reaches Alice and Bob over the same
/// channels she observed their probes on in the attacked round.
struct RecordedInjection<'a> {
    rss_ma: &'a [f64],
    rss_mb: &'a [f64],
}

impl InjectionChannel for RecordedInjection<'_> {
    fn inject(&mut self, _: usize, attack_round: usize, _: OpportunityKind, _: Thresholds) -> Injection {
        Injection {
            x_a: self.rss_ma[attack_round],
            x_b: self.rss_mb[attack_round],
            state_tail_probability: None,
        }
    }
}

/// Rebuilds Mallory's attack from the `injected` flags of a trace.
///
/// The guess of an injected round follows from her observation of Alice in
/// the last clean round before it, compared with the midpoint of Alice's
/// thresholds over the clean rounds.
fn attack_from_flags(trace: &MeasurementTrace, beta: f64, d: f64) -> Result<AttackTrace> {
    let clean: Vec<f64> = trace
        .x_a
        .iter()
        .zip(&trace.injected)
        .filter(|(_, &inj)| !inj)
        .map(|(&x, _)| x)
        .collect();
    let t = thresholds(&clean, beta)?;
    let mut out = AttackTrace::empty(d);
    let mut last_clean = None;
    for round in 0..trace.len() {
        if !trace.injected[round] {
            last_clean = Some(round);
            continue;
        }
        let opp = last_clean.ok_or_else(|| {
            Error::Protocol(format!("injected round {round} has no preceding observation"))
        })?;
        let kind = if trace.rss_ma[opp] > t.midpoint() {
            OpportunityKind::O1
        } else {
            OpportunityKind::O0
        };
        out.records.push(adversary::AttackRecord {
            opportunity_round: opp,
            round,
            kind,
            guessed: kind.guessed_bit(),
            injected_x_a: trace.x_a[round],
            injected_x_b: trace.x_b[round],
            landed: kind.beyond(trace.x_a[round], t),
            state_tail_probability: None,
            survived_to_key: false,
            alice_bit: None,
            correct: false,
        });
    }
    Ok(out)
}

/// Offline run over an ingested trace.
///
/// Injected rows are accounted as attacks. When the trace carries none and
/// `attack` is set, the attack is run on the trace itself.
pub fn replay(
    mut trace: MeasurementTrace,
    quantizer: &QuantizerConfig,
    attack: Option<&AdversaryConfig>,
    rs: RsParams,
    seed: u64,
) -> Result<ExperimentOutput> {
    trace.check()?;
    quantizer.validate()?;
    let d = attack.map_or(AdversaryConfig::default().d, |a| a.d);
    let (attack_trace, mallory_thresholds) = if trace.injected.iter().any(|&i| i) {
        let a = attack_from_flags(&trace, quantizer.beta, d).map_err(Error::at("replay"))?;
        (Some(a), None)
    } else if let Some(cfg) = attack {
        let t = thresholds(&trace.x_a, quantizer.beta).map_err(Error::at("replay"))?;
        let rss_ma = trace.rss_ma.clone();
        let rss_mb = trace.rss_mb.clone();
        let mut channel = RecordedInjection {
            rss_ma: &rss_ma,
            rss_mb: &rss_mb,
        };
        let a = adversary::run_attack(&mut trace, t, cfg, &mut channel).map_err(Error::at("replay"))?;
        (Some(a), Some(t))
    } else {
        (None, None)
    };
    let meta = RunMeta {
        source: "replay",
        scheme: None,
        seed,
        tx_power_dbm: None,
        mallory_power_dbm: None,
        mallory_thresholds,
    };
    downstream(trace, attack_trace, quantizer, rs, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSuccess {
    pub attempts: u64,
    pub landed: u64,
    pub rate: Option<f64>,
    /// Three binomial standard errors around the closed-form value.
    pub tolerance: Option<f64>,
    pub within_tolerance: Option<bool>,
}

impl EmpiricalSuccess {
    fn new(attempts: u64, landed: u64, expected: f64) -> Self {
        let rate = (attempts > 0).then(|| landed as f64 / attempts as f64);
        let tolerance = (attempts > 0).then(|| 3.0 * (expected * (1.0 - expected) / attempts as f64).sqrt());
        Self {
            attempts,
            landed,
            rate,
            tolerance,
            within_tolerance: rate.zip(tolerance).map(|(r, tol)| (r - expected).abs() <= tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub log10_p_key: f64,
    pub analysis: AnalysisResult,
    pub mallory_thresholds: Thresholds,
    pub empirical_p0: EmpiricalSuccess,
    pub empirical_p1: EmpiricalSuccess,
}

/// Closed-form attack analysis at the thresholds and counts of a simulated
/// run of `cfg`, next to the run's own per-attack success rates.
pub fn analyze(cfg: &ExperimentConfig) -> Result<AnalyzeReport> {
    let mut cfg = cfg.clone();
    cfg.adversary.enabled = true;
    let prep = cfg.prepare().map_err(Error::at("config"))?;
    let out = run_experiment(&cfg)?;
    let t = out.report.mallory_thresholds.ok_or_else(|| {
        Error::Stage {
            stage: "analyze",
            source: Box::new(Error::Degenerate("the run produced no thresholds for mallory".into())),
        }
    })?;
    let gs: GuessSuccess = closed_form_p0_p1(
        prep.scenario.link_am(),
        &prep.scenario.fading_am,
        t,
        prep.session.mallory_power_dbm,
    )
    .map_err(Error::at("analyze"))?;
    let summary = out.report.attack.expect("adversary enabled");
    let analysis = analyze_counts(gs, summary.n, summary.n0, out.report.key_bits as u64).map_err(Error::at("analyze"))?;
    Ok(AnalyzeReport {
        log10_p_key: analysis.key_guess.log10_p_key,
        analysis,
        mallory_thresholds: t,
        empirical_p0: EmpiricalSuccess::new(summary.attempts_o0, summary.landed_o0, gs.p0),
        empirical_p1: EmpiricalSuccess::new(summary.attempts_o1, summary.landed_o1, gs.p1),
    })
}

/// Paths of the files written by [`write_artifacts`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub report: PathBuf,
    pub trace: PathBuf,
    pub alice_bits: PathBuf,
    pub bob_bits: PathBuf,
    pub commitments: PathBuf,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the report, trace, both bitstreams and the commitments into `dir`.
pub fn write_artifacts(out: &ExperimentOutput, dir: &Path) -> Result<Artifacts> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let a = Artifacts {
        report: dir.join("report.json"),
        trace: dir.join("trace.csv"),
        alice_bits: dir.join("s_a.bits"),
        bob_bits: dir.join("s_b.bits"),
        commitments: dir.join("commitments.fcm"),
    };
    write_json(&out.report, &a.report)?;
    save_trace(&out.trace, &a.trace)?;
    write_bitstream(&a.alice_bits, &out.quantization.s_a)?;
    write_bitstream(&a.bob_bits, &out.quantization.s_b)?;
    let file = std::fs::File::create(&a.commitments).map_err(|e| Error::io(&a.commitments, e))?;
    write_commitments(
        std::io::BufWriter::new(file),
        out.reconciliation.params,
        &out.reconciliation.commitments,
    )
    .map_err(|e| Error::io(&a.commitments, e))?;
    Ok(a)
}
