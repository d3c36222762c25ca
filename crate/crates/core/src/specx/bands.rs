//! Transmit-band selection against a radio environment map.
//!
//! The shared window is split into `q` analysis bands whose inverse
//! interference levels form the target vector of a matching-pursuit style
//! search: transmit bins are added one at a time, each scored by how much
//! inverse interference it captures per unit of support cost, with a
//! penalty that favors few contiguous blocks over many fragments. Bands and
//! bins that touch the communication map are struck out before the search,
//! so the returned support is disjoint from the protected spectrum by
//! construction.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{BandRole, SpectralMap};
use crate::pursuit::lstsq;
use crate::xampling::FrequencyIndexSet;
use crate::{Error, Result};

/// Radio environment map: interference-plus-noise level per analysis band
/// on a uniform grid over the shared window.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rem {
    /// One level per analysis band, left to right.
    pub levels: Vec<f64>,
    /// Absolute left edge of the window in Hz.
    pub low_hz: f64,
    /// Width of one analysis band in Hz.
    pub band_width_hz: f64,
}

impl Rem {
    pub fn new(levels: Vec<f64>, low_hz: f64, band_width_hz: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyInput("environment map has no bands".into()));
        }
        if levels.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidInput(
                "interference levels must be finite and >= 0".into(),
            ));
        }
        if !(band_width_hz.is_finite() && band_width_hz > 0.0) || !low_hz.is_finite() {
            return Err(Error::InvalidInput("bad environment map geometry".into()));
        }
        Ok(Self {
            levels,
            low_hz,
            band_width_hz,
        })
    }

    pub fn bands(&self) -> usize {
        self.levels.len()
    }

    /// Absolute interval of analysis band `i`.
    pub fn band_interval(&self, i: usize) -> (f64, f64) {
        (
            self.low_hz + i as f64 * self.band_width_hz,
            self.low_hz + (i + 1) as f64 * self.band_width_hz,
        )
    }

    /// Full window covered by the map.
    pub fn window(&self) -> (f64, f64) {
        (
            self.low_hz,
            self.low_hz + self.bands() as f64 * self.band_width_hz,
        )
    }
}

/// Membership matrix between `bands` analysis bands and `bins` transmit
/// bins over the same window: entry (i, j) is 1 when bin j's center falls
/// in band i, so each column has exactly one nonzero.
pub fn band_mapping(bands: usize, bins: usize) -> DMatrix<f64> {
    DMatrix::from_fn(bands, bins, |i, j| {
        let band = ((j as f64 + 0.5) * bands as f64 / bins as f64).floor() as usize;
        if band == i {
            1.0
        } else {
            0.0
        }
    })
}

/// Selected transmit support.
#[derive(Debug, Clone)]
pub struct BandSelection {
    /// Least-squares fit of the inverse interference on the selected bins,
    /// scattered over the full bin grid.
    pub weights: Vec<f64>,
    /// Selected bin indices, sorted.
    pub support: Vec<usize>,
    /// Selected bins coalesced into absolute-frequency bands.
    pub radar_bands: SpectralMap,
}

fn block_count(sorted: &[usize]) -> usize {
    let mut blocks = 0;
    let mut prev: Option<usize> = None;
    for &j in sorted {
        if prev.map_or(true, |p| j != p + 1) {
            blocks += 1;
        }
        prev = Some(j);
    }
    blocks
}

fn refit_weights(
    d: &DMatrix<f64>,
    support: &[usize],
    target: &[f64],
) -> Result<Vec<f64>> {
    let cols = DMatrix::<Complex64>::from_fn(d.nrows(), support.len(), |i, c| {
        Complex64::new(d[(i, support[c])], 0.0)
    });
    let rhs = DMatrix::<Complex64>::from_fn(d.nrows(), 1, |i, _| Complex64::new(target[i], 0.0));
    let w = lstsq(&cols, &rhs)?;
    Ok(w.column(0).iter().map(|c| c.re).collect())
}

/// Greedy transmit-band selection.
///
/// `d` maps the `bins`-point transmit grid onto the analysis bands of
/// `rem` (see [`band_mapping`]). Bands and bins overlapping `f_c` are
/// excluded outright. Each step picks the unselected admissible bin with
/// the largest captured-energy-to-cost ratio, where the cost charges
/// ln(bins) for opening a new contiguous block and 1 per bin; bins that
/// merge or extend blocks are cheaper than bins that open new ones. The
/// search stops when the best score falls below `stop_ratio` times the
/// squared peak inverse interference, or rolls the last pick back when it
/// would exceed `nb` blocks.
pub fn band_select(
    rem: &Rem,
    f_c: &SpectralMap,
    nb: usize,
    bins: usize,
    d: &DMatrix<f64>,
    stop_ratio: f64,
) -> Result<BandSelection> {
    let q = rem.bands();
    if d.nrows() != q || d.ncols() != bins {
        return Err(Error::DimensionMismatch(format!(
            "mapping is {}x{}, expected {q}x{bins}",
            d.nrows(),
            d.ncols()
        )));
    }
    if nb == 0 || bins == 0 {
        return Err(Error::InvalidInput("need at least one block and bin".into()));
    }
    if !(stop_ratio.is_finite() && stop_ratio >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "stop ratio must be >= 0, got {stop_ratio}"
        )));
    }

    let (win_lo, win_hi) = rem.window();
    let bin_width = (win_hi - win_lo) / bins as f64;
    let bin_interval = |j: usize| {
        (
            win_lo + j as f64 * bin_width,
            win_lo + (j + 1) as f64 * bin_width,
        )
    };

    // Inverse interference per band; protected bands drop to zero and
    // zero-interference levels are floored to keep the inverse finite.
    let max_level = rem
        .levels
        .iter()
        .cloned()
        .filter(|l| *l > 0.0)
        .fold(0.0f64, f64::max);
    let floor = if max_level > 0.0 { 1e-9 * max_level } else { 1.0 };
    let mut y_inv = vec![0.0f64; q];
    for i in 0..q {
        let (lo, hi) = rem.band_interval(i);
        if f_c.overlaps_interval(lo, hi) {
            continue;
        }
        y_inv[i] = 1.0 / rem.levels[i].max(floor);
    }
    let admissible: Vec<bool> = (0..bins)
        .map(|j| {
            let (lo, hi) = bin_interval(j);
            !f_c.overlaps_interval(lo, hi)
        })
        .collect();
    let peak = y_inv.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 || admissible.iter().all(|a| !a) {
        return Err(Error::EmptyInput("all bands blocked".into()));
    }

    let ln_bins = (bins as f64).ln();
    let eps = stop_ratio * peak * peak;
    let tiny = (1e-12 * peak).powi(2);

    let mut support: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut residual = y_inv.clone();

    loop {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..bins {
            if !admissible[j] || support.contains(&j) {
                continue;
            }
            let col = d.column(j);
            let den: f64 = col.iter().map(|v| v * v).sum();
            if den == 0.0 {
                continue;
            }
            let num: f64 = col
                .iter()
                .zip(&residual)
                .map(|(v, r)| v * r)
                .sum::<f64>()
                .powi(2)
                / den;
            let left = j > 0 && support.contains(&(j - 1));
            let right = j + 1 < bins && support.contains(&(j + 1));
            let delta_blocks: f64 = match (left, right) {
                (false, false) => 1.0,
                (true, true) => -1.0,
                _ => 0.0,
            };
            let delta_cost = delta_blocks * ln_bins + 1.0;
            let score = if delta_cost <= 0.0 {
                if num > tiny {
                    f64::INFINITY
                } else {
                    continue;
                }
            } else {
                num / delta_cost
            };
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((pick, score)) = best else { break };
        if score <= eps {
            break;
        }

        let prev_support = support.clone();
        let prev_weights = weights.clone();
        support.push(pick);
        support.sort_unstable();
        if block_count(&support) > nb {
            support = prev_support;
            weights = prev_weights;
            break;
        }
        weights = refit_weights(d, &support, &y_inv)?;
        for i in 0..q {
            residual[i] = y_inv[i];
            for (c, &j) in support.iter().enumerate() {
                residual[i] -= d[(i, j)] * weights[c];
            }
        }
    }

    let mut full = vec![0.0f64; bins];
    for (c, &j) in support.iter().enumerate() {
        full[j] = weights[c];
    }
    let mut bands: Vec<(f64, f64)> = Vec::new();
    for &j in &support {
        let (lo, hi) = bin_interval(j);
        match bands.last_mut() {
            Some(last) if (lo - last.1).abs() <= 1e-9 * bin_width => last.1 = hi,
            _ => bands.push((lo, hi)),
        }
    }
    Ok(BandSelection {
        weights: full,
        support,
        radar_bands: SpectralMap::new(BandRole::Radar, bands)?,
    })
}

/// Shaped transmit spectrum.
#[derive(Debug, Clone)]
pub struct ShapedSpectrum {
    /// Per-bin transmit spectrum over the full grid, zero outside the
    /// selected bands.
    pub spectrum: Vec<Complex64>,
    /// Uniform amplification applied inside the bands.
    pub beta: f64,
}

/// Concentrate a wideband transmit spectrum on the selected bands at equal
/// total power: bins outside `f_r` are zeroed and in-band bins are scaled
/// by a single beta chosen so the integrated power matches `total_power`.
/// `h_nyq` samples the full band on centered bin frequencies
/// -B/2 + (k + 1/2) B/n; `f_r` uses the same centered axis.
pub fn shape_transmit_spectrum(
    h_nyq: &[Complex64],
    f_r: &SpectralMap,
    total_power: f64,
    bandwidth_hz: f64,
) -> Result<ShapedSpectrum> {
    if h_nyq.is_empty() {
        return Err(Error::EmptyInput("empty transmit spectrum".into()));
    }
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be > 0, got {bandwidth_hz}"
        )));
    }
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::InvalidInput(format!(
            "total power must be > 0, got {total_power}"
        )));
    }
    let n = h_nyq.len();
    let df = bandwidth_hz / n as f64;
    let mut in_band = vec![false; n];
    let mut power = 0.0f64;
    for k in 0..n {
        let f = -bandwidth_hz / 2.0 + (k as f64 + 0.5) * df;
        if f_r.contains(f) {
            in_band[k] = true;
            power += h_nyq[k].norm_sqr();
        }
    }
    power *= df;
    if power <= 0.0 {
        return Err(Error::EmptyInput(
            "no transmit energy falls inside the selected bands".into(),
        ));
    }
    let beta = (total_power / power).sqrt();
    let spectrum = h_nyq
        .iter()
        .enumerate()
        .map(|(k, h)| {
            if in_band[k] {
                h * Complex64::new(beta, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(ShapedSpectrum { spectrum, beta })
}

/// Fourier-bin indices of a pulse grid that fall inside the given bands:
/// bin k sits at low_edge + k / pri_tau and is kept when some band contains
/// it (half-open intervals).
pub fn bands_to_bins(
    bands: &SpectralMap,
    low_edge_hz: f64,
    pri_tau: f64,
    n: usize,
) -> Result<FrequencyIndexSet> {
    if !(pri_tau.is_finite() && pri_tau > 0.0) || n == 0 {
        return Err(Error::InvalidInput("bad bin grid".into()));
    }
    let (_, win_hi) = (low_edge_hz, low_edge_hz + n as f64 / pri_tau);
    for &(lo, hi) in &bands.bands {
        if lo < low_edge_hz - 1e-9 / pri_tau || hi > win_hi + 1e-9 / pri_tau {
            return Err(Error::InvalidInput(format!(
                "band ({lo}, {hi}) leaves the bin grid [{low_edge_hz}, {win_hi}]"
            )));
        }
    }
    let mut indices = Vec::new();
    for k in 0..n {
        let f = low_edge_hz + k as f64 / pri_tau;
        if bands.contains(f) {
            indices.push(k);
        }
    }
    FrequencyIndexSet::from_indices(indices)
}
