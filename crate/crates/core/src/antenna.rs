//! Antenna gain profiles: per-mode gain tables over departure angle.
//!
//! A table value is the linear multiplier applied to a path's fading
//! coefficient when the antenna operates in that mode. Between listed
//! angles the gain is interpolated linearly, wrapping across 360°.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::rician_from_gains;
use crate::channel::FadingParams;
use crate::error::{Error, Result};
use crate::geometry::{normalize_deg, path_angles, NodeId, Topology};

pub const PROFILE_HEADER: &str = "mode,angle_deg,gain_linear";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Reconfigurable antenna.
    Ra,
    /// Omnidirectional antenna: one mode, unit gain everywhere.
    Oa,
}

/// Gain samples of a single mode, sorted by angle.
#[derive(Debug, Clone, PartialEq)]
struct GainTable {
    angles: Vec<f64>,
    gains: Vec<f64>,
}

impl GainTable {
    fn interpolate(&self, angle: f64) -> f64 {
        let n = self.angles.len();
        if n == 1 {
            return self.gains[0];
        }
        let a = normalize_deg(angle);
        // index of first listed angle strictly greater than `a`
        let hi = self.angles.partition_point(|&x| x <= a);
        let (lo_angle, lo_gain, hi_angle, hi_gain) = if hi == 0 {
            (self.angles[n - 1] - 360.0, self.gains[n - 1], self.angles[0], self.gains[0])
        } else if hi == n {
            (self.angles[n - 1], self.gains[n - 1], self.angles[0] + 360.0, self.gains[0])
        } else {
            (self.angles[hi - 1], self.gains[hi - 1], self.angles[hi], self.gains[hi])
        };
        let span = hi_angle - lo_angle;
        let w = (a - lo_angle) / span;
        lo_gain + w * (hi_gain - lo_gain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaProfile {
    kind: ProfileKind,
    modes: Vec<ModeId>,
    tables: Vec<GainTable>,
}

impl AntennaProfile {
    pub fn omni() -> Self {
        Self {
            kind: ProfileKind::Oa,
            modes: vec![ModeId(0)],
            tables: vec![GainTable {
                angles: vec![0.0],
                gains: vec![1.0],
            }],
        }
    }

    /// Builds a profile from `(mode, angle_deg, gain)` samples.
    ///
    /// A single mode with unit gain at every listed angle is classified as
    /// omnidirectional; everything else is a reconfigurable profile.
    pub fn from_samples(samples: impl IntoIterator<Item = (u32, f64, f64)>) -> Result<Self> {
        let mut by_mode: BTreeMap<u32, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
        for (mode, angle, gain) in samples {
            validate_sample(angle, gain).map_err(Error::Validation)?;
            let slot = by_mode.entry(mode).or_default();
            if slot.insert(angle.to_bits(), (angle, gain)).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate entry for mode {mode} at {angle}°"
                )));
            }
        }
        if by_mode.is_empty() {
            return Err(Error::Validation("profile has no modes".into()));
        }
        let mut modes = Vec::with_capacity(by_mode.len());
        let mut tables = Vec::with_capacity(by_mode.len());
        for (mode, entries) in by_mode {
            let mut pairs: Vec<(f64, f64)> = entries.into_values().collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            modes.push(ModeId(mode));
            tables.push(GainTable {
                angles: pairs.iter().map(|p| p.0).collect(),
                gains: pairs.iter().map(|p| p.1).collect(),
            });
        }
        let kind = if tables.len() == 1 && tables[0].gains.iter().all(|&g| g == 1.0) {
            ProfileKind::Oa
        } else {
            ProfileKind::Ra
        };
        Ok(Self { kind, modes, tables })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_index(&self, mode: ModeId) -> Option<usize> {
        self.modes.binary_search(&mode).ok()
    }

    pub fn gain(&self, mode: ModeId, angle_deg: f64) -> Result<f64> {
        let idx = self.mode_index(mode).ok_or(Error::UnknownMode(mode.0))?;
        Ok(self.gain_at(idx, angle_deg))
    }

    /// Gain by position in [`Self::modes`].
    pub fn gain_at(&self, mode_index: usize, angle_deg: f64) -> f64 {
        self.tables[mode_index].interpolate(angle_deg)
    }

    /// Listed `(angle, gain)` samples of one mode.
    pub fn samples(&self, mode_index: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let t = &self.tables[mode_index];
        t.angles.iter().copied().zip(t.gains.iter().copied())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut samples = Vec::new();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut saw_header = false;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !saw_header {
                let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
                if cols != ["mode", "angle_deg", "gain_linear"] {
                    return Err(parse_err(
                        lineno,
                        format!("expected header `{PROFILE_HEADER}`, found `{trimmed}`"),
                    ));
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(parse_err(
                    lineno,
                    format!("expected 3 columns, found {}", cols.len()),
                ));
            }
            let mode: u32 = cols[0]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad mode `{}`", cols[0])))?;
            let angle: f64 = cols[1]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad angle `{}`", cols[1])))?;
            let gain: f64 = cols[2]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad gain `{}`", cols[2])))?;
            validate_sample(angle, gain)
                .map_err(|msg| Error::Validation(format!("{}:{lineno}: {msg}", path.display())))?;
            samples.push((mode, angle, gain));
        }
        if !saw_header {
            return Err(parse_err(1, "empty profile file".into()));
        }
        Self::from_samples(samples)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{PROFILE_HEADER}")?;
        for (idx, mode) in self.modes.iter().enumerate() {
            for (angle, gain) in self.samples(idx) {
                writeln!(out, "{},{},{}", mode.0, angle, gain)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn validate_sample(angle: f64, gain: f64) -> std::result::Result<(), String> {
    if !(angle.is_finite() && (0.0..360.0).contains(&angle)) {
        return Err(format!("angle {angle} outside [0, 360)"));
    }
    if !gain.is_finite() {
        return Err(format!("gain {gain} is not finite"));
    }
    if gain < 0.0 {
        return Err(format!("negative gain {gain}"));
    }
    Ok(())
}

/// Shape of a synthesized directional beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamShape {
    /// Number of modes; mode `u` points at `u * 360 / modes` degrees.
    pub modes: u32,
    /// Half-power (3 dB) beamwidth in degrees.
    pub beamwidth_deg: f64,
    /// Ratio of boresight to backlobe gain, dB.
    pub front_to_back_db: f64,
    /// Boresight gain as a linear multiplier.
    pub peak_gain: f64,
    /// Angular sampling step of the emitted table, degrees.
    pub angle_step_deg: f64,
}

impl Default for BeamShape {
    fn default() -> Self {
        Self {
            modes: 360,
            beamwidth_deg: 120.0,
            front_to_back_db: 12.0,
            peak_gain: 10f64.powf(3.0 / 20.0),
            angle_step_deg: 1.0,
        }
    }
}

impl BeamShape {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.modes == 0 {
            return bad("beam needs at least one mode".into());
        }
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg < 360.0) {
            return bad(format!("beamwidth {} outside (0, 360)", self.beamwidth_deg));
        }
        if !(self.front_to_back_db > 3.0 && self.front_to_back_db.is_finite()) {
            return bad(format!(
                "front-to-back ratio {} dB must exceed the 3 dB beam edge",
                self.front_to_back_db
            ));
        }
        if !(self.peak_gain > 0.0 && self.peak_gain.is_finite()) {
            return bad(format!("peak gain {} must be positive", self.peak_gain));
        }
        if !(self.angle_step_deg > 0.0 && self.angle_step_deg <= 360.0) {
            return bad(format!("angle step {} outside (0, 360]", self.angle_step_deg));
        }
        Ok(())
    }

    /// Gain in dB relative to boresight at `offset` degrees off the beam axis.
    ///
    /// `-FB * ((1 - cos φ) / 2)^k`, with `k` fixed by the 3 dB beamwidth.
    /// For `k = 1` the dB pattern is a raised cosine.
    pub fn relative_db(&self, offset_deg: f64) -> f64 {
        let quarter = (self.beamwidth_deg / 4.0).to_radians();
        let k = (3.0 / self.front_to_back_db).ln() / quarter.sin().powi(2).ln();
        let s = (1.0 - offset_deg.to_radians().cos()) / 2.0;
        -self.front_to_back_db * s.max(0.0).powf(k)
    }

    pub fn synthesize(&self) -> Result<AntennaProfile> {
        self.validate()?;
        let steps = (360.0 / self.angle_step_deg).round().max(1.0) as usize;
        let mut samples = Vec::with_capacity(steps * self.modes as usize);
        for mode in 0..self.modes {
            let pointing = mode as f64 * 360.0 / self.modes as f64;
            for step in 0..steps {
                let angle = step as f64 * self.angle_step_deg;
                if angle >= 360.0 {
                    break;
                }
                let db = self.relative_db(angle - pointing);
                samples.push((mode, angle, self.peak_gain * 10f64.powf(db / 20.0)));
            }
        }
        AntennaProfile::from_samples(samples)
    }
}

/// Transmit power that lets every usable mode reach `detection_threshold_dbm`
/// at Bob on average.
///
/// For each mode the mean Rician amplitude of the A→B channel is evaluated
/// and the power needed to lift it to the threshold is computed; the
/// maximum over modes is returned. Modes with zero gain on every A→B path
/// are skipped.
pub fn calibrate_tx_power(
    profile: &AntennaProfile,
    topology: &Topology,
    fading_ab: &FadingParams,
    detection_threshold_dbm: f64,
) -> Result<f64> {
    if !detection_threshold_dbm.is_finite() {
        return Err(Error::Calibration(format!(
            "detection threshold {detection_threshold_dbm} is not finite"
        )));
    }
    let paths = path_angles(topology, NodeId::Alice, NodeId::Bob)?;
    let mut required = f64::NEG_INFINITY;
    let mut usable = 0usize;
    for idx in 0..profile.mode_count() {
        let gains: Vec<f64> = paths.angles.iter().map(|&a| profile.gain_at(idx, a)).collect();
        if gains.iter().all(|&g| g == 0.0) {
            log::warn!(
                "mode {} has zero gain on every A-B path; excluded from calibration",
                profile.modes[idx].0
            );
            continue;
        }
        let params = rician_from_gains(&gains, fading_ab)?;
        let power = detection_threshold_dbm - 20.0 * params.mean_amplitude().log10();
        required = required.max(power);
        usable += 1;
    }
    if usable == 0 {
        return Err(Error::Calibration(
            "every mode has zero gain towards bob".into(),
        ));
    }
    Ok(required)
}
