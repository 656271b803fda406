//! Multipath fading with antenna-mode dependent path gains.
//!
//! Each link carries one line-of-sight path and one single-bounce path per
//! scatterer. Path `l` contributes `g(u, θ_l) · a_l` to the complex channel,
//! where `a_l` is a complex Gaussian coefficient frozen for a coherence block.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::antenna::{AntennaProfile, ModeId};
use crate::error::{Error, Result};
use crate::geometry::{path_angles, LinkPathSet, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Mean of the line-of-sight coefficient.
    pub los_mean: Complex64,
    /// Per-quadrature standard deviation of every path coefficient.
    pub sigma0: f64,
}

impl FadingParams {
    pub fn new(los_mean: Complex64, sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::Validation(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(los_mean.re.is_finite() && los_mean.im.is_finite()) {
            return Err(Error::Validation("line-of-sight mean is not finite".into()));
        }
        Ok(Self { los_mean, sigma0 })
    }

    /// Free-space line-of-sight mean over `distance`, with the scatter
    /// level set by the Rician `k_factor` (see [`Self::k_factor`]).
    pub fn from_geometry(distance: f64, wavelength: f64, k_factor: f64, path_count: usize) -> Result<Self> {
        if !(distance > 0.0 && wavelength > 0.0 && k_factor > 0.0 && path_count >= 1) {
            return Err(Error::Validation(format!(
                "invalid fading geometry: distance {distance}, wavelength {wavelength}, K {k_factor}, paths {path_count}"
            )));
        }
        let amplitude = wavelength / (4.0 * std::f64::consts::PI * distance);
        let phase = -2.0 * std::f64::consts::PI * (distance / wavelength).fract();
        let sigma0 = amplitude / (2.0 * k_factor * path_count as f64).sqrt();
        Self::new(Complex64::from_polar(amplitude, phase), sigma0)
    }

    /// `|μ0|² / (2 σ0² (P + 1))`: line-of-sight power over total scattered power.
    pub fn k_factor(&self, path_count: usize) -> f64 {
        self.los_mean.norm_sqr() / (2.0 * self.sigma0 * self.sigma0 * path_count as f64)
    }
}

/// Path coefficients of one link for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingState {
    pub coefficients: Vec<Complex64>,
    pub block_index: usize,
}

pub fn sample_fading_block<R: Rng + ?Sized>(
    rng: &mut R,
    params: &FadingParams,
    path_count: usize,
    block_index: usize,
) -> FadingState {
    let mut coefficients = Vec::with_capacity(path_count);
    fill_coefficients(rng, params, path_count, &mut coefficients);
    FadingState {
        coefficients,
        block_index,
    }
}

pub(crate) fn fill_coefficients<R: Rng + ?Sized>(
    rng: &mut R,
    params: &FadingParams,
    path_count: usize,
    out: &mut Vec<Complex64>,
) {
    for l in 0..path_count {
        let mean = if l == 0 { params.los_mean } else { Complex64::new(0.0, 0.0) };
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        out.push(mean + Complex64::new(re, im) * params.sigma0);
    }
}

/// `Σ g_l a_l` for precomputed per-path gains.
pub fn combine(coefficients: &[Complex64], gains: &[f64]) -> Complex64 {
    coefficients
        .iter()
        .zip(gains)
        .fold(Complex64::new(0.0, 0.0), |acc, (a, &g)| acc + a * g)
}

/// Channel seen through `profile` operating in `mode`.
pub fn channel_gain(
    state: &FadingState,
    profile: &AntennaProfile,
    mode: ModeId,
    paths: &LinkPathSet,
) -> Result<Complex64> {
    if paths.path_count() != state.coefficients.len() {
        return Err(Error::Contract(format!(
            "{} path angles for {} fading coefficients",
            paths.path_count(),
            state.coefficients.len()
        )));
    }
    let idx = profile.mode_index(mode).ok_or(Error::UnknownMode(mode.0))?;
    let gains: Vec<f64> = paths.angles.iter().map(|&a| profile.gain_at(idx, a)).collect();
    Ok(combine(&state.coefficients, &gains))
}

/// Noiseless received strength in dBm; a null channel yields `-inf` (erasure).
pub fn rss_dbm(h: Complex64, tx_power_dbm: f64) -> f64 {
    let mag = h.norm();
    if mag == 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * mag.log10() + tx_power_dbm
    }
}

/// `20·log10|h| + P_x + ε` with `ε ~ N(0, noise_sigma_db²)`.
///
/// One normal deviate is always drawn so RNG streams stay aligned whatever
/// the noise level.
pub fn rss_from_gain<R: Rng + ?Sized>(
    h: Complex64,
    tx_power_dbm: f64,
    noise_sigma_db: f64,
    rng: &mut R,
) -> f64 {
    let eps: f64 = rng.sample(StandardNormal);
    rss_dbm(h, tx_power_dbm) + noise_sigma_db * eps
}

/// Per-mode effective path gains of one link.
///
/// `gains[u][l]` is the product of the transmitter's gain on departure angle
/// `l` under its mode `u` and the receiver's (fixed) gain on the matching
/// arrival angle. Antenna reciprocity makes the table valid in both
/// directions.
#[derive(Debug, Clone)]
pub struct LinkGains {
    pub paths: LinkPathSet,
    gains: Vec<f64>,
    path_count: usize,
}

impl LinkGains {
    /// `tx` uses every mode of `tx_profile`; `rx` uses the first mode of
    /// `rx_profile`.
    pub fn new(
        topology: &Topology,
        tx: NodeId,
        tx_profile: &AntennaProfile,
        rx: NodeId,
        rx_profile: &AntennaProfile,
    ) -> Result<Self> {
        let paths = path_angles(topology, tx, rx)?;
        let arrival = arrival_angles(topology, tx, rx)?;
        let path_count = paths.path_count();
        let mut gains = Vec::with_capacity(path_count * tx_profile.mode_count());
        for u in 0..tx_profile.mode_count() {
            for (dep, arr) in paths.angles.iter().zip(&arrival) {
                gains.push(tx_profile.gain_at(u, *dep) * rx_profile.gain_at(0, *arr));
            }
        }
        Ok(Self {
            paths,
            gains,
            path_count,
        })
    }

    pub fn path_count(&self) -> usize {
        self.path_count
    }

    pub fn mode_count(&self) -> usize {
        self.gains.len() / self.path_count
    }

    pub fn mode(&self, mode_index: usize) -> &[f64] {
        &self.gains[mode_index * self.path_count..(mode_index + 1) * self.path_count]
    }
}

/// Angles at which each path of the `tx → rx` link arrives at `rx`, in the
/// same order as [`path_angles`].
fn arrival_angles(topology: &Topology, tx: NodeId, rx: NodeId) -> Result<Vec<f64>> {
    let at_rx = path_angles(topology, rx, tx)?;
    // path_angles(rx, tx) lists rx->tx then rx->scatterers: same ordering
    Ok(at_rx.angles)
}
