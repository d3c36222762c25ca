//! Spectral coexistence between a cognitive radio and a cognitive radar.
//!
//! The radio side senses a wideband spectrum from low-rate samples with a
//! modulated wideband converter ([`mwc`]); the radar side picks its transmit
//! subbands away from the detected communication support ([`bands`]), shapes
//! the transmit spectrum to keep total power fixed, and recovers the
//! delay-Doppler map from the Fourier coefficients inside those subbands.
//! [`coexist`] runs the full handshake epoch by epoch, and [`ezb`] evaluates
//! the Ziv-Zakai delay-estimation bounds that justify the multiband design.

pub mod bands;
pub mod coexist;
pub mod ezb;
pub mod mwc;

pub use bands::{
    band_mapping, band_select, bands_to_bins, shape_transmit_spectrum, BandSelection, Rem,
    ShapedSpectrum,
};
pub use coexist::{rmsle, specx_loop, CommBand, SpecxEpochLog, SpecxScenario};
pub use ezb::{ezb, ezb_uniform, EzbPoint};
pub use mwc::{
    ctf_frame, mwc_sample, radar_slice_support, reconstruct_slices, slice_bands,
    support_recover_known, KnownSupportRecovery, MwcConfig,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which actor a set of bands belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandRole {
    /// The whole shareable frequency range.
    Shared,
    /// Bands occupied by communication signals (F_C).
    Communication,
    /// Bands the radar transmits on (F_R).
    Radar,
}

/// A sorted list of disjoint frequency intervals in Hz.
///
/// Intervals are half-open [low, high): two bands may share an endpoint
/// without overlapping. An empty list is a valid map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMap {
    /// (low, high) pairs, strictly increasing.
    pub bands: Vec<(f64, f64)>,
    pub role: BandRole,
}

impl SpectralMap {
    /// Sorts the intervals and validates that they are disjoint.
    pub fn new(role: BandRole, mut bands: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &bands {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "band ({lo}, {hi}) is not a finite interval with low < high"
                )));
            }
        }
        bands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in bands.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::InvalidInput(format!(
                    "bands ({}, {}) and ({}, {}) overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { bands, role })
    }

    pub fn empty(role: BandRole) -> Self {
        Self {
            bands: Vec::new(),
            role,
        }
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Sum of interval widths in Hz.
    pub fn total_width(&self) -> f64 {
        self.bands.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// True when `f` lies in some band (half-open test).
    pub fn contains(&self, f: f64) -> bool {
        self.bands.iter().any(|&(lo, hi)| lo <= f && f < hi)
    }

    /// True when [lo, hi) intersects some band with positive measure.
    pub fn overlaps_interval(&self, lo: f64, hi: f64) -> bool {
        self.bands.iter().any(|&(a, b)| lo < b && a < hi)
    }

    /// True when the two maps share any positive-measure frequency set.
    pub fn intersects(&self, other: &SpectralMap) -> bool {
        self.bands
            .iter()
            .any(|&(lo, hi)| other.overlaps_interval(lo, hi))
    }

    /// Total width of the pairwise intersection in Hz.
    pub fn intersection_width(&self, other: &SpectralMap) -> f64 {
        let mut acc = 0.0;
        for &(lo, hi) in &self.bands {
            for &(a, b) in &other.bands {
                acc += (hi.min(b) - lo.max(a)).max(0.0);
            }
        }
        acc
    }

    /// Same intervals translated by `df` Hz.
    pub fn shifted(&self, df: f64) -> SpectralMap {
        SpectralMap {
            bands: self.bands.iter().map(|&(lo, hi)| (lo + df, hi + df)).collect(),
            role: self.role,
        }
    }
}
