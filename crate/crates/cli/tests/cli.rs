use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rakg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rakg")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// The reference config shortened to `rounds`, with optional text edits.
fn config(dir: &Path, rounds: usize, edits: &[(&str, &str)]) -> PathBuf {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let mut text = std::fs::read_to_string(src).unwrap().replace("rounds = 100000", &format!("rounds = {rounds}"));
    for (from, to) in edits {
        assert!(text.contains(from));
        text = text.replace(from, to);
    }
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 20_000, &[]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = rakg(&["simulate", "--config", s(&cfg), "--out-dir", s(&a)]);
    let rb = rakg(&["simulate", "--config", s(&cfg), "--out-dir", s(&b)]);
    assert_eq!(code(&ra), 0, "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(ra.stdout, rb.stdout);
    for f in ["report.json", "trace.csv", "s_a.bits", "s_b.bits", "commitments.fcm"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&ra.stdout).unwrap();
    assert!(report["key_bits"].as_u64().unwrap() > 0);
}

#[test]
fn exit_codes_separate_usage_validation_and_runtime() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&rakg(&["--help"])), 0);
    assert_eq!(code(&rakg(&["simulate"])), 1);
    assert_eq!(code(&rakg(&["frobnicate"])), 1);
    let bad = config(dir.path(), 1000, &[("beta = 0.4", "beta = 1.5")]);
    let o = rakg(&["simulate", "--config", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("quantizer.beta"));
    let missing = dir.path().join("absent.csv");
    assert_eq!(code(&rakg(&["replay", "--trace", s(&missing)])), 3);
}

#[test]
fn replay_matches_the_simulated_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 20_000, &[]);
    let out = dir.path().join("run");
    let sim = rakg(&["simulate", "--config", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(code(&sim), 0);
    let rep = rakg(&["replay", "--trace", s(&out.join("trace.csv")), "--config", s(&cfg)]);
    assert_eq!(code(&rep), 0, "{}", String::from_utf8_lossy(&rep.stderr));
    let a: serde_json::Value = serde_json::from_slice(&sim.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&rep.stdout).unwrap();
    assert_eq!(a["key_bits"], b["key_bits"]);
    assert_eq!(a["attack"]["kre"], b["attack"]["kre"]);
}

#[test]
fn commit_then_open_recovers_a_clean_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 50_000, &[("enabled = true", "enabled = false")]);
    let out = dir.path().join("run");
    assert_eq!(code(&rakg(&["simulate", "--config", s(&cfg), "--out-dir", s(&out)])), 0);
    let fcm = dir.path().join("c.fcm");
    let c = rakg(&["commit", "--bits", s(&out.join("s_a.bits")), "--config", s(&cfg), "--out", s(&fcm)]);
    assert_eq!(code(&c), 0, "{}", String::from_utf8_lossy(&c.stderr));
    let rec = dir.path().join("rec.bits");
    let o = rakg(&[
        "open", "--bits", s(&out.join("s_b.bits")), "--commitments", s(&fcm), "--out", s(&rec), "--strict",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(rec.exists());
}

#[test]
fn randomness_and_profile_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 20_000, &[]);
    let out = dir.path().join("run");
    assert_eq!(code(&rakg(&["simulate", "--config", s(&cfg), "--out-dir", s(&out)])), 0);
    let r = rakg(&["randomness", "--bits", s(&out.join("s_a.bits"))]);
    assert_eq!(code(&r), 0);
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(v["monobit"].is_object());
    let profile = dir.path().join("beam.csv");
    let g = rakg(&["gen-profile", "--config", s(&cfg), "--out", s(&profile)]);
    assert_eq!(code(&g), 0, "{}", String::from_utf8_lossy(&g.stderr));
    assert!(std::fs::read_to_string(&profile).unwrap().lines().count() > 360);
}
