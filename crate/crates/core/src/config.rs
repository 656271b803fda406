//! Experiment configuration, read from TOML.
//!
//! Every table rejects unknown keys and the TOML parser rejects duplicate
//! keys. Only `seed` and the three node positions are mandatory.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryConfig;
use crate::antenna::{calibrate_tx_power, AntennaProfile, BeamShape};
use crate::channel::FadingParams;
use crate::error::{Error, Result};
use crate::geometry::{NodeId, Point, Topology, DEFAULT_WAVELENGTH_M};
use crate::quantize::QuantizerConfig;
use crate::reconcile::RsParams;
use crate::session::{stream_rng, Scenario, SessionConfig};

const STREAM_PLACEMENT: u64 = 4;

/// Scatterers are dropped uniformly in `[0, 20] x [-5, 5]` when none are listed.
const PLACEMENT_AREA: ([f64; 2], [f64; 2]) = ([0.0, 20.0], [-5.0, 5.0]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Alice switches to a uniformly drawn antenna mode every round.
    #[default]
    #[serde(alias = "RAKG")]
    Rakg,
    /// Alice keeps a single omnidirectional antenna.
    #[serde(alias = "OAKG")]
    Oakg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub alice: [f64; 2],
    pub bob: [f64; 2],
    pub mallory: [f64; 2],
    /// Explicit scatterer positions; random placement when absent.
    #[serde(default)]
    pub scatterers: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_scatterer_count")]
    pub scatterer_count: usize,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

fn default_scatterer_count() -> usize {
    2
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_M
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaConfig {
    /// Profile CSV for Alice's reconfigurable antenna. Relative paths are
    /// resolved against the config file's directory.
    pub profile: Option<PathBuf>,
    /// Synthesis parameters used when no profile file is given.
    pub beam: BeamShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFading {
    pub los_re: f64,
    pub los_im: f64,
    pub sigma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Rician K-factor applied to every link without an explicit override.
    pub k_factor: f64,
    pub ab: Option<LinkFading>,
    pub am: Option<LinkFading>,
    pub bm: Option<LinkFading>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            k_factor: 10.0,
            ab: None,
            am: None,
            bm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub rounds: usize,
    pub coherence_block_rounds: usize,
    pub noise_sigma_db: f64,
    /// Bob's detection threshold that transmit power is calibrated against.
    pub detection_threshold_dbm: f64,
    /// Overrides the calibrated transmit power.
    pub tx_power_dbm: Option<f64>,
    /// Mallory's injection power; defaults to the legitimate transmit power.
    pub mallory_power_dbm: Option<f64>,
    pub hold_fading_during_attack: bool,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            rounds: 100_000,
            coherence_block_rounds: 10,
            noise_sigma_db: 0.0,
            detection_threshold_dbm: -75.0,
            tx_power_dbm: None,
            mallory_power_dbm: None,
            hold_fading_during_attack: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarySection {
    pub enabled: bool,
    pub d: f64,
    pub repeat_injection: bool,
}

impl Default for AdversarySection {
    fn default() -> Self {
        let base = AdversaryConfig::default();
        Self {
            enabled: true,
            d: base.d,
            repeat_injection: base.repeat_injection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub antenna: AntennaConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub quantizer: QuantizerConfig,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub reconciliation: RsParams,
}

/// A validated configuration turned into simulation inputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub session: SessionConfig,
    pub quantizer: QuantizerConfig,
    pub adversary: Option<AdversaryConfig>,
    pub rs: RsParams,
}

fn field_err(field: &str, e: Error) -> Error {
    match e {
        Error::Validation(msg) | Error::Geometry(msg) => Error::Config(format!("{field}: {msg}")),
        other => other,
    }
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

impl ExperimentConfig {
    /// Parses and validates TOML text. `base_dir` anchors relative paths.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(base), Some(p)) = (base_dir, cfg.antenna.profile.as_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.session;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{field}: must be positive and finite, got {v}")))
            }
        };
        positive("topology.wavelength_m", self.topology.wavelength_m)?;
        positive("channel.k_factor", self.channel.k_factor)?;
        if s.rounds == 0 {
            return Err(Error::Config("session.rounds: must be at least 1".into()));
        }
        if s.coherence_block_rounds == 0 {
            return Err(Error::Config("session.coherence_block_rounds: must be at least 1".into()));
        }
        if !(s.noise_sigma_db >= 0.0 && s.noise_sigma_db.is_finite()) {
            return Err(Error::Config(format!(
                "session.noise_sigma_db: must be finite and non-negative, got {}",
                s.noise_sigma_db
            )));
        }
        for (field, v) in [
            ("session.detection_threshold_dbm", Some(s.detection_threshold_dbm)),
            ("session.tx_power_dbm", s.tx_power_dbm),
            ("session.mallory_power_dbm", s.mallory_power_dbm),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::Config(format!("{field}: must be finite, got {v}")));
                }
            }
        }
        let q = &self.quantizer;
        if !(q.beta > 0.0 && q.beta < 1.0) {
            return Err(Error::Config(format!("quantizer.beta: must lie in (0, 1), got {}", q.beta)));
        }
        if q.excursion_len == 0 {
            return Err(Error::Config("quantizer.excursion_len: must be at least 1".into()));
        }
        self.reconciliation.validate().map_err(|e| field_err("reconciliation", e))?;
        if self.adversary.enabled {
            self.adversary_config()
                .validate()
                .map_err(|e| field_err("adversary.d", e))?;
        }
        if self.antenna.profile.is_none() && self.scheme == Scheme::Rakg {
            self.antenna.beam.validate().map_err(|e| field_err("antenna.beam", e))?;
        }
        for (field, link) in [("channel.ab", self.channel.ab), ("channel.am", self.channel.am), ("channel.bm", self.channel.bm)] {
            if let Some(l) = link {
                FadingParams::new(Complex64::new(l.los_re, l.los_im), l.sigma0).map_err(|e| field_err(field, e))?;
            }
        }
        self.topology().map(|_| ())
    }

    pub fn adversary_config(&self) -> AdversaryConfig {
        AdversaryConfig {
            d: self.adversary.d,
            repeat_injection: self.adversary.repeat_injection,
        }
    }

    /// Node layout; scatterers are placed from `seed` when not listed.
    pub fn topology(&self) -> Result<Topology> {
        let t = &self.topology;
        let scatterers = match &t.scatterers {
            Some(list) => list.iter().copied().map(point).collect(),
            None => {
                let mut rng = stream_rng(self.seed, STREAM_PLACEMENT);
                let (xs, ys) = PLACEMENT_AREA;
                (0..t.scatterer_count)
                    .map(|_| Point::new(rng.random_range(xs[0]..xs[1]), rng.random_range(ys[0]..ys[1])))
                    .collect()
            }
        };
        Topology::new(point(t.alice), point(t.bob), point(t.mallory), scatterers, t.wavelength_m)
            .map_err(|e| field_err("topology", e))
    }

    /// Alice's antenna under the configured scheme.
    pub fn alice_profile(&self) -> Result<AntennaProfile> {
        match self.scheme {
            Scheme::Oakg => Ok(AntennaProfile::omni()),
            Scheme::Rakg => match &self.antenna.profile {
                Some(path) => AntennaProfile::load(path),
                None => self.antenna.beam.synthesize(),
            },
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let topology = self.topology()?;
        let paths = topology.scatterers().len() + 1;
        let wavelength = self.topology.wavelength_m;
        let fading = |a: NodeId, b: NodeId, explicit: Option<LinkFading>| match explicit {
            Some(l) => FadingParams::new(Complex64::new(l.los_re, l.los_im), l.sigma0),
            None => {
                let d = topology.position(a).distance(&topology.position(b));
                FadingParams::from_geometry(d, wavelength, self.channel.k_factor, paths)
            }
        };
        let ab = fading(NodeId::Alice, NodeId::Bob, self.channel.ab)?;
        let am = fading(NodeId::Alice, NodeId::Mallory, self.channel.am)?;
        let bm = fading(NodeId::Bob, NodeId::Mallory, self.channel.bm)?;
        let alice = self.alice_profile()?;
        let s = &self.session;
        let tx_power_dbm = match s.tx_power_dbm {
            Some(p) => p,
            None => calibrate_tx_power(&alice, &topology, &ab, s.detection_threshold_dbm)?,
        };
        let scenario = Scenario::new(
            topology,
            alice,
            AntennaProfile::omni(),
            AntennaProfile::omni(),
            ab,
            am,
            bm,
        )?;
        let session = SessionConfig {
            rounds: s.rounds,
            coherence_block_rounds: s.coherence_block_rounds,
            noise_sigma_db: s.noise_sigma_db,
            tx_power_dbm,
            mallory_power_dbm: s.mallory_power_dbm.unwrap_or(tx_power_dbm),
            hold_fading_during_attack: s.hold_fading_during_attack,
        };
        Ok(Prepared {
            scenario,
            session,
            quantizer: self.quantizer,
            adversary: self.adversary.enabled.then(|| self.adversary_config()),
            rs: self.reconciliation,
        })
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text, path.parent())
        .map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 1\n[topology]\nalice = [5.0, 0.0]\nbob = [15.0, 0.0]\nmallory = [10.0, 8.66]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        assert_eq!(c.quantizer.beta, 0.4);
        assert_eq!(c.quantizer.excursion_len, 1);
        assert_eq!(c.session.coherence_block_rounds, 10);
        assert_eq!(c.adversary.d, 3.0);
        assert!(c.adversary.enabled);
        assert_eq!(c.scheme, Scheme::Rakg);
        assert_eq!(c.topology().unwrap().scatterers().len(), 2);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 1\n", "");
        assert!(ExperimentConfig::from_toml_str(&text, None).is_err());
    }

    #[test]
    fn bad_beta_names_the_field() {
        let text = format!("{MINIMAL}[quantizer]\nbeta = 1.5\n");
        let err = ExperimentConfig::from_toml_str(&text, None).unwrap_err().to_string();
        assert!(err.contains("quantizer") && err.contains("beta"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let unknown = format!("{MINIMAL}[session]\nround = 5\n");
        let err = ExperimentConfig::from_toml_str(&unknown, None).unwrap_err().to_string();
        assert!(err.contains("round"), "{err}");
        let dup = format!("{MINIMAL}seed = 2\n");
        assert!(ExperimentConfig::from_toml_str(&dup, None).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap(), None).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn oakg_calibrates_its_own_power() {
        let mut c = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        c.session.rounds = 10;
        let ra = c.prepare().unwrap();
        c.scheme = Scheme::Oakg;
        let oa = c.prepare().unwrap();
        assert_eq!(oa.scenario.mode_count(), 1);
        assert_ne!(ra.session.tx_power_dbm, oa.session.tx_power_dbm);
        assert_eq!(oa.session.mallory_power_dbm, oa.session.tx_power_dbm);
    }
}
