//! Per-round measurement synthesis for one key-generation session.
//!
//! Fading is frozen per coherence block; Alice draws a fresh antenna mode
//! every round and both probe directions of that round use it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AdversaryConfig, AttackTrace, Injection, InjectionChannel, OpportunityKind};
use crate::antenna::AntennaProfile;
use crate::channel::{combine, fill_coefficients, rss_dbm, FadingParams, LinkGains};
use crate::error::{Error, Result};
use crate::geometry::{NodeId, Topology};
use crate::quantize::{thresholds, Thresholds};

/// RNG stream indices; each consumer owns one so enabling the adversary
/// never perturbs the legitimate measurements.
const STREAM_FADING: u64 = 0;
const STREAM_MODES: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_ADVERSARY: u64 = 3;

/// Radios report RSS at this resolution. Rounding at the source keeps the
/// 4-decimal trace export lossless.
pub const RSS_RESOLUTION_DB: f64 = 1e-4;

/// Rounds to the reporting resolution; erasures stay `-inf`.
pub fn report_rss(v: f64) -> f64 {
    if v.is_finite() {
        (v * 1e4).round() / 1e4
    } else {
        v
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Geometry, antennas and fading statistics of the three links.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub alice_profile: AntennaProfile,
    pub bob_profile: AntennaProfile,
    pub mallory_profile: AntennaProfile,
    pub fading_ab: FadingParams,
    pub fading_am: FadingParams,
    pub fading_bm: FadingParams,
    link_ab: LinkGains,
    link_am: LinkGains,
    link_bm: LinkGains,
}

impl Scenario {
    pub fn new(
        topology: Topology,
        alice_profile: AntennaProfile,
        bob_profile: AntennaProfile,
        mallory_profile: AntennaProfile,
        fading_ab: FadingParams,
        fading_am: FadingParams,
        fading_bm: FadingParams,
    ) -> Result<Self> {
        let link_ab = LinkGains::new(&topology, NodeId::Alice, &alice_profile, NodeId::Bob, &bob_profile)?;
        let link_am = LinkGains::new(&topology, NodeId::Alice, &alice_profile, NodeId::Mallory, &mallory_profile)?;
        let link_bm = LinkGains::new(&topology, NodeId::Bob, &bob_profile, NodeId::Mallory, &mallory_profile)?;
        Ok(Self {
            topology,
            alice_profile,
            bob_profile,
            mallory_profile,
            fading_ab,
            fading_am,
            fading_bm,
            link_ab,
            link_am,
            link_bm,
        })
    }

    /// Free-space line-of-sight means for each link at a common Rician K-factor.
    pub fn from_geometry(
        topology: Topology,
        alice_profile: AntennaProfile,
        bob_profile: AntennaProfile,
        mallory_profile: AntennaProfile,
        wavelength: f64,
        k_factor: f64,
    ) -> Result<Self> {
        let paths = topology.scatterers().len() + 1;
        let fading = |a: NodeId, b: NodeId| {
            let d = topology.position(a).distance(&topology.position(b));
            FadingParams::from_geometry(d, wavelength, k_factor, paths)
        };
        let ab = fading(NodeId::Alice, NodeId::Bob)?;
        let am = fading(NodeId::Alice, NodeId::Mallory)?;
        let bm = fading(NodeId::Bob, NodeId::Mallory)?;
        Self::new(topology, alice_profile, bob_profile, mallory_profile, ab, am, bm)
    }

    pub fn link_ab(&self) -> &LinkGains {
        &self.link_ab
    }

    /// Alice's modes towards Mallory.
    pub fn link_am(&self) -> &LinkGains {
        &self.link_am
    }

    pub fn link_bm(&self) -> &LinkGains {
        &self.link_bm
    }

    pub fn mode_count(&self) -> usize {
        self.alice_profile.mode_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub rounds: usize,
    pub coherence_block_rounds: usize,
    pub noise_sigma_db: f64,
    pub tx_power_dbm: f64,
    /// Mallory's injection power.
    pub mallory_power_dbm: f64,
    /// Mallory's links keep the opportunity round's fading while she
    /// injects, even across a block boundary.
    pub hold_fading_during_attack: bool,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Validation("rounds must be at least 1".into()));
        }
        if self.coherence_block_rounds == 0 {
            return Err(Error::Validation("coherence_block_rounds must be at least 1".into()));
        }
        if !(self.noise_sigma_db >= 0.0 && self.noise_sigma_db.is_finite()) {
            return Err(Error::Validation(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma_db
            )));
        }
        if !(self.tx_power_dbm.is_finite() && self.mallory_power_dbm.is_finite()) {
            return Err(Error::Validation("transmit powers must be finite".into()));
        }
        Ok(())
    }
}

/// Everything measured during a session, one entry per round.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementTrace {
    /// Alice's antenna mode id per round.
    pub modes: Vec<u32>,
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    /// Mallory's observation of Alice's probe.
    pub rss_ma: Vec<f64>,
    /// Mallory's observation of Bob's probe.
    pub rss_mb: Vec<f64>,
    pub injected: Vec<bool>,
    /// Zero when unknown (ingested traces).
    pub coherence_block_rounds: usize,
}

impl MeasurementTrace {
    pub fn len(&self) -> usize {
        self.x_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_a.is_empty()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            modes: Vec::with_capacity(n),
            x_a: Vec::with_capacity(n),
            x_b: Vec::with_capacity(n),
            rss_ma: Vec::with_capacity(n),
            rss_mb: Vec::with_capacity(n),
            injected: Vec::with_capacity(n),
            coherence_block_rounds: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.x_a.len();
        let lens = [
            self.modes.len(),
            self.x_b.len(),
            self.rss_ma.len(),
            self.rss_mb.len(),
            self.injected.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Contract("trace series have different lengths".into()));
        }
        Ok(())
    }
}

/// Per-block path coefficients of Mallory's two links, kept for injection.
#[derive(Debug, Clone)]
pub struct MalloryChannels {
    paths_am: usize,
    paths_bm: usize,
    am: Vec<Complex64>,
    bm: Vec<Complex64>,
}

impl MalloryChannels {
    fn am(&self, block: usize) -> &[Complex64] {
        &self.am[block * self.paths_am..(block + 1) * self.paths_am]
    }

    fn bm(&self, block: usize) -> &[Complex64] {
        &self.bm[block * self.paths_bm..(block + 1) * self.paths_bm]
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub trace: MeasurementTrace,
    /// Present when an adversary was configured.
    pub attack: Option<AttackTrace>,
    /// The thresholds Mallory assumed (Alice's, on the clean series).
    pub mallory_thresholds: Option<Thresholds>,
}

/// Synthesizes the clean measurements of every round.
pub fn simulate_clean(scenario: &Scenario, cfg: &SessionConfig, seed: u64) -> Result<(MeasurementTrace, MalloryChannels)> {
    cfg.validate()?;
    let n = cfg.rounds;
    let block_len = cfg.coherence_block_rounds;
    let blocks = n.div_ceil(block_len);
    let mut fading_rng = stream_rng(seed, STREAM_FADING);
    let mut mode_rng = stream_rng(seed, STREAM_MODES);
    let mut noise_rng = stream_rng(seed, STREAM_NOISE);

    let p_ab = scenario.link_ab.path_count();
    let p_am = scenario.link_am.path_count();
    let p_bm = scenario.link_bm.path_count();
    let mut mallory = MalloryChannels {
        paths_am: p_am,
        paths_bm: p_bm,
        am: Vec::with_capacity(blocks * p_am),
        bm: Vec::with_capacity(blocks * p_bm),
    };
    let modes = scenario.alice_profile.modes();
    let mut trace = MeasurementTrace::with_capacity(n);
    trace.coherence_block_rounds = block_len;
    let mut ab = Vec::with_capacity(p_ab);
    let sigma = cfg.noise_sigma_db;
    let mut noisy = |v: f64| {
        let eps: f64 = noise_rng.sample(StandardNormal);
        report_rss(v + sigma * eps)
    };

    for block in 0..blocks {
        ab.clear();
        fill_coefficients(&mut fading_rng, &scenario.fading_ab, p_ab, &mut ab);
        fill_coefficients(&mut fading_rng, &scenario.fading_am, p_am, &mut mallory.am);
        fill_coefficients(&mut fading_rng, &scenario.fading_bm, p_bm, &mut mallory.bm);
        let am = mallory.am(block);
        let h_bm = combine(mallory.bm(block), scenario.link_bm.mode(0));
        let start = block * block_len;
        for _ in start..(start + block_len).min(n) {
            let u = mode_rng.random_range(0..modes.len());
            let h_ab = combine(&ab, scenario.link_ab.mode(u));
            let h_am = combine(am, scenario.link_am.mode(u));
            let clean = rss_dbm(h_ab, cfg.tx_power_dbm);
            trace.modes.push(modes[u].0);
            trace.x_a.push(noisy(clean));
            trace.x_b.push(noisy(clean));
            trace.rss_ma.push(noisy(rss_dbm(h_am, cfg.tx_power_dbm)));
            trace.rss_mb.push(noisy(rss_dbm(h_bm, cfg.tx_power_dbm)));
            trace.injected.push(false);
        }
    }
    Ok((trace, mallory))
}

/// Mallory's probes in a simulated session.
struct SimulatedInjection<'a> {
    scenario: &'a Scenario,
    cfg: &'a SessionConfig,
    channels: &'a MalloryChannels,
    mode_index: Vec<usize>,
    rng: ChaCha8Rng,
}

impl InjectionChannel for SimulatedInjection<'_> {
    fn inject(&mut self, opportunity_round: usize, attack_round: usize, kind: OpportunityKind, t: Thresholds) -> Injection {
        let block_len = self.cfg.coherence_block_rounds;
        let block = if self.cfg.hold_fading_during_attack {
            opportunity_round / block_len
        } else {
            attack_round / block_len
        };
        let am = self.channels.am(block);
        let power = self.cfg.mallory_power_dbm;
        let sigma = self.cfg.noise_sigma_db;
        let u = self.mode_index[attack_round];
        let link = self.scenario.link_am();
        let h_am = combine(am, link.mode(u));
        let h_bm = combine(self.channels.bm(block), self.scenario.link_bm().mode(0));
        let e_a: f64 = self.rng.sample(StandardNormal);
        let e_b: f64 = self.rng.sample(StandardNormal);

        // chance that a uniformly drawn mode lands on the guessed side
        let mut tail = 0.0;
        for v in 0..link.mode_count() {
            let rss = report_rss(rss_dbm(combine(am, link.mode(v)), power));
            tail += adversary::landing_probability(rss, sigma, kind, t);
        }
        Injection {
            x_a: report_rss(rss_dbm(h_am, power) + sigma * e_a),
            x_b: report_rss(rss_dbm(h_bm, power) + sigma * e_b),
            state_tail_probability: Some(tail / link.mode_count() as f64),
        }
    }
}

/// Clean synthesis followed, when `adversary` is set, by Mallory's attack.
///
/// Mallory's thresholds are Alice's, computed on the clean series with
/// `beta`.
pub fn simulate_session(
    scenario: &Scenario,
    cfg: &SessionConfig,
    adversary: Option<&AdversaryConfig>,
    beta: f64,
    seed: u64,
) -> Result<SessionOutput> {
    let (mut trace, channels) = simulate_clean(scenario, cfg, seed)?;
    let Some(adv) = adversary else {
        return Ok(SessionOutput {
            trace,
            attack: None,
            mallory_thresholds: None,
        });
    };
    adv.validate()?;
    let t = match thresholds(&trace.x_a, beta) {
        Ok(t) => t,
        Err(Error::Degenerate(msg)) => {
            log::warn!("mallory cannot derive thresholds ({msg}); no attack");
            return Ok(SessionOutput {
                trace,
                attack: Some(AttackTrace::empty(adv.d)),
                mallory_thresholds: None,
            });
        }
        Err(e) => return Err(e),
    };
    let modes = scenario.alice_profile.modes();
    let mode_index = trace
        .modes
        .iter()
        .map(|&m| modes.iter().position(|id| id.0 == m).expect("mode drawn from profile"))
        .collect();
    let mut channel = SimulatedInjection {
        scenario,
        cfg,
        channels: &channels,
        mode_index,
        rng: stream_rng(seed, STREAM_ADVERSARY),
    };
    let attack = adversary::run_attack(&mut trace, t, adv, &mut channel)?;
    Ok(SessionOutput {
        trace,
        attack: Some(attack),
        mallory_thresholds: Some(t),
    })
}
