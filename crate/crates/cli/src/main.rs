//! `rakg`: simulate, analyze and replay key-generation sessions.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime failure
//! (including reconciliation or verification failure under `--strict`).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rakg_core::antenna::BeamShape;
use rakg_core::bitio::{read_bitstream, read_raw_bits, sidecar_path, write_bitstream};
use rakg_core::config::{parse_config, ExperimentConfig};
use rakg_core::experiment::{
    analyze, replay, run_experiment, run_trials, summarize_trials, write_artifacts, write_json, AnalyzeReport,
    SessionReport,
};
use rakg_core::quantize::{Bitstream, QuantizerConfig};
use rakg_core::randomness::{randomness_tests, RandomnessReport};
use rakg_core::reconcile::{commit, open, read_commitments, write_commitments, ReedSolomon, RsParams};
use rakg_core::trace::ingest_trace;
use rakg_core::Error;

#[derive(Parser)]
#[command(name = "rakg", version, about = "Physical-layer key generation under injection attack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Directory for report and artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded sessions end to end.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Independent sessions with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Fail when reconciliation or key verification fails.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Closed-form attack analysis next to a simulated run.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Offline run over a trace CSV.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Quantizer, adversary and code parameters; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run the attack on a clean trace.
        #[arg(long)]
        attack: bool,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Commit to a bitstream block by block.
    Commit {
        #[arg(long)]
        bits: PathBuf,
        /// Supplies the code parameters and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Commitments file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Open commitments with the peer's bitstream.
    Open {
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        commitments: PathBuf,
        /// Recovered bitstream to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Run the statistical tests on a bitstream file.
    Randomness {
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Write a synthesized antenna profile CSV.
    GenProfile {
        /// Takes the beam shape from `[antenna.beam]`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        modes: Option<u32>,
        #[arg(long)]
        beamwidth_deg: Option<f64>,
        #[arg(long)]
        front_to_back_db: Option<f64>,
        #[arg(long)]
        peak_gain_db: Option<f64>,
        #[arg(long)]
        angle_step_deg: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Core(Error),
    /// A run completed but did not meet `--strict`.
    Strict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_validation() => 2,
            _ => 3,
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = parse_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn print_csv<T: Serialize>(rows: &[T]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let wrap = |e: csv::Error| Error::Io {
        path: "<stdout>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

#[derive(Serialize)]
struct SessionRow {
    seed: u64,
    rounds: usize,
    key_bits: usize,
    bit_mismatch_rate: f64,
    n: Option<u64>,
    n0: Option<u64>,
    m: Option<u64>,
    kre: Option<f64>,
    krr: Option<f64>,
    reconciled_bits: usize,
    failed_blocks: usize,
    verified: bool,
    secret_bit_rate: f64,
    randomness_passed: bool,
}

impl From<&SessionReport> for SessionRow {
    fn from(r: &SessionReport) -> Self {
        Self {
            seed: r.seed,
            rounds: r.rounds,
            key_bits: r.key_bits,
            bit_mismatch_rate: r.bit_mismatch_rate,
            n: r.attack.map(|a| a.n),
            n0: r.attack.map(|a| a.n0),
            m: r.attack.map(|a| a.m),
            kre: r.attack.and_then(|a| a.kre),
            krr: r.attack.and_then(|a| a.krr),
            reconciled_bits: r.reconciliation.reconciled_bits,
            failed_blocks: r.reconciliation.failed_blocks,
            verified: r.reconciliation.verified,
            secret_bit_rate: r.secret_bit_rate,
            randomness_passed: r.randomness.all_passed(),
        }
    }
}

fn emit_reports(reports: &[SessionReport], format: Format) -> Result<(), Error> {
    match format {
        Format::Csv => print_csv(&reports.iter().map(SessionRow::from).collect::<Vec<_>>()),
        Format::Json if reports.len() == 1 => print_json(&reports[0]),
        Format::Json => print_json(&summarize_trials(reports.to_vec())),
    }
}

fn check_strict(strict: bool, reports: &[SessionReport]) -> CliResult {
    if !strict {
        return Ok(());
    }
    let failed: Vec<u64> = reports
        .iter()
        .filter(|r| !r.reconciliation.succeeded())
        .map(|r| r.seed)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Strict(format!(
            "reconciliation or key verification failed for seed(s) {failed:?}"
        )))
    }
}

fn simulate(config: &Path, seed: Option<u64>, trials: usize, strict: bool, output: &Output) -> CliResult {
    let cfg = load_config(config, seed)?;
    if trials == 0 {
        return Err(Error::Validation("--trials must be at least 1".into()).into());
    }
    let reports = if trials == 1 {
        let out = run_experiment(&cfg)?;
        if let Some(dir) = &output.out_dir {
            write_artifacts(&out, dir)?;
        }
        vec![out.report]
    } else {
        let reports = run_trials(&cfg, trials)?;
        if let Some(dir) = &output.out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            write_json(&summarize_trials(reports.clone()), &dir.join("trials.json"))?;
        }
        reports
    };
    emit_reports(&reports, output.format)?;
    check_strict(strict, &reports)
}

#[derive(Serialize)]
struct AnalyzeRow {
    p0: f64,
    p1: f64,
    n: u64,
    n0: u64,
    ell: u64,
    e_kre: Option<f64>,
    e_krr: f64,
    log10_p_key: f64,
    beats_random: bool,
    empirical_p0: Option<f64>,
    empirical_p1: Option<f64>,
}

fn run_analyze(config: &Path, seed: Option<u64>, output: &Output) -> CliResult {
    let cfg = load_config(config, seed)?;
    let report: AnalyzeReport = analyze(&cfg)?;
    if let Some(dir) = &output.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        write_json(&report, &dir.join("analysis.json"))?;
    }
    match output.format {
        Format::Json => print_json(&report)?,
        Format::Csv => {
            let a = &report.analysis;
            print_csv(&[AnalyzeRow {
                p0: a.p0,
                p1: a.p1,
                n: a.n,
                n0: a.n0,
                ell: a.ell,
                e_kre: a.e_kre,
                e_krr: a.e_krr,
                log10_p_key: report.log10_p_key,
                beats_random: a.key_guess.beats_random,
                empirical_p0: report.empirical_p0.rate,
                empirical_p1: report.empirical_p1.rate,
            }])?
        }
    }
    Ok(())
}

fn run_replay(
    trace: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    attack: bool,
    strict: bool,
    output: &Output,
) -> CliResult {
    let cfg = config.map(|p| load_config(p, seed)).transpose()?;
    let quantizer = cfg.as_ref().map_or_else(QuantizerConfig::default, |c| c.quantizer);
    let rs = cfg.as_ref().map_or_else(RsParams::default, |c| c.reconciliation);
    let adversary = cfg.as_ref().map_or_else(Default::default, |c| c.adversary_config());
    let seed = seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let t = ingest_trace(trace)?;
    let out = replay(t, &quantizer, attack.then_some(&adversary), rs, seed)?;
    if let Some(dir) = &output.out_dir {
        write_artifacts(&out, dir)?;
    }
    let reports = [out.report];
    emit_reports(&reports, output.format)?;
    check_strict(strict, &reports)
}

/// A bitstream with its sidecar, or raw packed bits numbered from zero.
fn load_bits(path: &Path) -> Result<Bitstream, Error> {
    if sidecar_path(path).exists() {
        read_bitstream(path)
    } else {
        let bits = read_raw_bits(path)?;
        let rounds = (0..bits.len()).collect();
        Bitstream::new(bits, rounds)
    }
}

#[derive(Serialize)]
struct CommitSummary {
    params: RsParams,
    blocks: usize,
    bits_committed: usize,
    bits_dropped: usize,
}

fn run_commit(bits: &Path, config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult {
    let cfg = config.map(|p| load_config(p, seed)).transpose()?;
    let params = cfg.as_ref().map_or_else(RsParams::default, |c| c.reconciliation);
    let seed = seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let code = ReedSolomon::new(params)?;
    let s_a = load_bits(bits)?;
    let block = params.codeword_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut commitments = Vec::new();
    for chunk in s_a.bits.chunks_exact(block) {
        // the private word is not kept; the digest inside the commitment
        // is all Bob needs to check his opening
        let (c, _) = commit(chunk, &code, &mut rng)?;
        commitments.push(c);
    }
    let file = std::fs::File::create(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    write_commitments(std::io::BufWriter::new(file), params, &commitments).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    print_json(&CommitSummary {
        params,
        blocks: commitments.len(),
        bits_committed: commitments.len() * block,
        bits_dropped: s_a.len() % block,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct OpenSummary {
    params: RsParams,
    blocks: usize,
    failed_blocks: Vec<usize>,
    recovered_bits: usize,
}

fn run_open(bits: &Path, commitments: &Path, out: &Path, strict: bool) -> CliResult {
    let file = std::fs::File::open(commitments).map_err(|e| Error::Io {
        path: commitments.to_path_buf(),
        source: e,
    })?;
    let (params, blocks) = read_commitments(std::io::BufReader::new(file), commitments)?;
    let code = ReedSolomon::new(params)?;
    let s_b = load_bits(bits)?;
    let block = params.codeword_bits();
    if s_b.len() < blocks.len() * block {
        return Err(Error::Validation(format!(
            "{} holds {} bits, {} blocks need {}",
            bits.display(),
            s_b.len(),
            blocks.len(),
            blocks.len() * block
        ))
        .into());
    }
    let mut recovered = Vec::new();
    let mut rounds = Vec::new();
    let mut failed = Vec::new();
    for (i, c) in blocks.iter().enumerate() {
        let range = i * block..(i + 1) * block;
        match open(&s_b.bits[range.clone()], c, &code)? {
            Ok(b) => {
                recovered.extend(b);
                rounds.extend_from_slice(&s_b.source_rounds[range]);
            }
            Err(_) => failed.push(i),
        }
    }
    write_bitstream(out, &Bitstream::new(recovered, rounds)?)?;
    let summary = OpenSummary {
        params,
        blocks: blocks.len(),
        recovered_bits: (blocks.len() - failed.len()) * block,
        failed_blocks: failed,
    };
    print_json(&summary)?;
    if strict && !summary.failed_blocks.is_empty() {
        return Err(Failure::Strict(format!(
            "{} of {} blocks failed to open",
            summary.failed_blocks.len(),
            summary.blocks
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TestRow {
    test: &'static str,
    p_value: Option<f64>,
    passed: Option<bool>,
}

fn run_randomness(bits: &Path, strict: bool, format: Format) -> CliResult {
    let s = load_bits(bits)?;
    let r: RandomnessReport = randomness_tests(&s.bits);
    match format {
        Format::Json => print_json(&r)?,
        Format::Csv => print_csv(
            &[
                ("monobit", r.monobit),
                ("block_frequency", r.block_frequency),
                ("runs", r.runs),
                ("approximate_entropy", r.approximate_entropy),
            ]
            .map(|(test, t)| TestRow {
                test,
                p_value: t.p_value,
                passed: t.passed(),
            }),
        )?,
    }
    if strict && !r.all_passed() {
        return Err(Failure::Strict("bitstream failed at least one test".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_gen_profile(
    config: Option<&Path>,
    modes: Option<u32>,
    beamwidth_deg: Option<f64>,
    front_to_back_db: Option<f64>,
    peak_gain_db: Option<f64>,
    angle_step_deg: Option<f64>,
    out: &Path,
) -> CliResult {
    let mut beam = match config {
        Some(p) => parse_config(p)?.antenna.beam,
        None => BeamShape::default(),
    };
    if let Some(v) = modes {
        beam.modes = v;
    }
    if let Some(v) = beamwidth_deg {
        beam.beamwidth_deg = v;
    }
    if let Some(v) = front_to_back_db {
        beam.front_to_back_db = v;
    }
    if let Some(v) = peak_gain_db {
        beam.peak_gain = 10f64.powf(v / 20.0);
    }
    if let Some(v) = angle_step_deg {
        beam.angle_step_deg = v;
    }
    beam.synthesize()?.save(out)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            trials,
            strict,
            output,
        } => simulate(&config, seed, trials, strict, &output),
        Command::Analyze { config, seed, output } => run_analyze(&config, seed, &output),
        Command::Replay {
            trace,
            config,
            seed,
            attack,
            strict,
            output,
        } => run_replay(&trace, config.as_deref(), seed, attack, strict, &output),
        Command::Commit { bits, config, seed, out } => run_commit(&bits, config.as_deref(), seed, &out),
        Command::Open {
            bits,
            commitments,
            out,
            strict,
        } => run_open(&bits, &commitments, &out, strict),
        Command::Randomness { bits, strict, format } => run_randomness(&bits, strict, format),
        Command::GenProfile {
            config,
            modes,
            beamwidth_deg,
            front_to_back_db,
            peak_gain_db,
            angle_step_deg,
            out,
        } => run_gen_profile(
            config.as_deref(),
            modes,
            beamwidth_deg,
            front_to_back_db,
            peak_gain_db,
            angle_step_deg,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Strict(msg) => eprintln!("strict: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
