//! Ziv-Zakai delay-estimation bounds for wideband and band-concentrated
//! transmissions.
//!
//! Both bounds share one shape: a prior-limited term driven by the Gaussian
//! detection error at the working SNR plus a resolution term driven by the
//! mean squared bandwidth of the transmit spectrum,
//!   EZB = sigma_prior^2 2Q(sqrt(SNR/2)) + g(SNR/4) / (SNR Fbar^2),
//! with g the lower incomplete gamma function of order 3/2. Concentrating
//! the same total power on a few narrow subbands raises the in-band SNR and
//! replaces SNR Fbar^2 by the sum over subbands of SNR_i Fbar_i^2, which
//! grows with the squared subband centers; spreading the subbands apart
//! therefore tightens the bound at both ends of the sweep.

use super::SpectralMap;
use crate::stats::{gaussian_q, lower_incomplete_gamma};
use crate::{Error, Result};

/// One point of the bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EzbPoint {
    /// Bound for the full-band transmission.
    pub conventional: f64,
    /// Bound for the band-concentrated transmission.
    pub cognitive: f64,
}

fn bound(snr: f64, denom: f64, prior_var: f64) -> f64 {
    prior_var * 2.0 * gaussian_q((snr / 2.0).sqrt())
        + lower_incomplete_gamma(1.5, snr / 4.0) / denom
}

/// Ziv-Zakai bounds at one SNR point.
///
/// `snr` and `rms_bw_hz` describe the full-band system; `snr_tilde` is the
/// in-band SNR after concentration and `subbands` lists per-subband pairs
/// (SNR_i, sqrt of the mean squared frequency in Hz) whose combination
/// replaces the full-band resolution denominator. `prior_var` is the
/// variance of the uniform delay prior.
pub fn ezb(
    snr: f64,
    rms_bw_hz: f64,
    snr_tilde: f64,
    subbands: &[(f64, f64)],
    prior_var: f64,
) -> Result<EzbPoint> {
    if !(snr.is_finite() && snr > 0.0) || !(snr_tilde.is_finite() && snr_tilde > 0.0) {
        return Err(Error::InvalidInput(format!(
            "SNR values must be > 0, got {snr} and {snr_tilde}"
        )));
    }
    if !(rms_bw_hz.is_finite() && rms_bw_hz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rms bandwidth must be > 0, got {rms_bw_hz}"
        )));
    }
    if !(prior_var.is_finite() && prior_var >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "prior variance must be >= 0, got {prior_var}"
        )));
    }
    if subbands.is_empty() {
        return Err(Error::EmptyInput("no subbands".into()));
    }
    let mut denom_sub = 0.0f64;
    for &(snr_i, fbar_i) in subbands {
        if !(snr_i.is_finite() && snr_i >= 0.0) || !fbar_i.is_finite() {
            return Err(Error::InvalidInput(
                "subband SNR must be finite and >= 0".into(),
            ));
        }
        denom_sub += snr_i * fbar_i * fbar_i;
    }
    if denom_sub <= 0.0 {
        return Err(Error::InvalidInput(
            "subbands carry no resolution (zero SNR or zero frequency)".into(),
        ));
    }
    Ok(EzbPoint {
        conventional: bound(snr, snr * rms_bw_hz * rms_bw_hz, prior_var),
        cognitive: bound(snr_tilde, denom_sub, prior_var),
    })
}

/// Bounds for a flat spectrum concentrated uniformly on `bands` at equal
/// total power.
///
/// The full band B has mean squared frequency B^2/12. Concentration at the
/// same power raises the in-band SNR by B over the summed band width, and
/// each subband centered at f_i with width B_i contributes the in-band SNR
/// times f_i^2 + B_i^2/12 to the resolution denominator. Bands use the
/// centered axis [-B/2, B/2].
pub fn ezb_uniform(
    snr: f64,
    bandwidth_hz: f64,
    bands: &SpectralMap,
    prior_var: f64,
) -> Result<EzbPoint> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be > 0, got {bandwidth_hz}"
        )));
    }
    if bands.is_empty() {
        return Err(Error::EmptyInput("no transmit bands".into()));
    }
    let half = bandwidth_hz / 2.0;
    for &(lo, hi) in &bands.bands {
        if lo < -half - 1e-9 * bandwidth_hz || hi > half + 1e-9 * bandwidth_hz {
            return Err(Error::InvalidInput(format!(
                "band ({lo}, {hi}) leaves the transmit bandwidth"
            )));
        }
    }
    let total: f64 = bands.total_width();
    let snr_tilde = snr * bandwidth_hz / total;
    let subbands: Vec<(f64, f64)> = bands
        .bands
        .iter()
        .map(|&(lo, hi)| {
            let center = 0.5 * (lo + hi);
            let width = hi - lo;
            let msf = center * center + width * width / 12.0;
            (snr_tilde, msf.sqrt())
        })
        .collect();
    let rms_bw = (bandwidth_hz * bandwidth_hz / 12.0).sqrt();
    ezb(snr, rms_bw, snr_tilde, &subbands, prior_var)
}
