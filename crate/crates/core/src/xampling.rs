//! Sub-Nyquist Fourier-coefficient acquisition.
//!
//! The acquisition chain is modeled ideally: a frame of time samples maps to
//! the exact Fourier coefficients of the received signal on a chosen index
//! set kappa, which is all the downstream recovery stages consume. Three
//! selection schemes are provided (random "direct" indices, a lowpass run,
//! and disjoint multiband runs), plus an alias-free check for folding
//! spectral subbands down to a slow ADC rate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fft;
use crate::rng::{stream_rng, SCHEME_STREAM};
use crate::scene::{RadarConfig, TimeFrames};
use crate::{Error, Result};

/// Coefficient selection scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// K uniform-random distinct indices.
    Direct,
    /// The run {0..K-1}.
    Lowpass,
    /// `bands` disjoint runs of equal length at random offsets.
    Multiband { bands: usize },
}

/// Sorted, unique Fourier bin indices kappa within {0..N-1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyIndexSet {
    pub indices: Vec<usize>,
    pub scheme: Scheme,
}

impl FrequencyIndexSet {
    /// All N bins.
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            scheme: Scheme::Lowpass,
        }
    }

    pub fn lowpass(n: usize, k: usize) -> Result<Self> {
        check_k(n, k)?;
        Ok(Self {
            indices: (0..k).collect(),
            scheme: Scheme::Lowpass,
        })
    }

    pub fn direct(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_k(n, k)?;
        let mut rng = stream_rng(seed, SCHEME_STREAM);
        let mut indices: Vec<usize> = sample(&mut rng, n, k).into_iter().collect();
        indices.sort_unstable();
        Ok(Self {
            indices,
            scheme: Scheme::Direct,
        })
    }

    /// `bands` disjoint runs of length K/bands each, at random offsets.
    /// Placement retries fresh draws up to 100 times before giving up.
    pub fn multiband(n: usize, k: usize, bands: usize, seed: u64) -> Result<Self> {
        check_k(n, k)?;
        if bands == 0 || k % bands != 0 {
            return Err(Error::InvalidInput(format!(
                "band count {bands} must divide K = {k}"
            )));
        }
        let run = k / bands;
        // Runs must be separated by at least one skipped bin, otherwise two
        // groups merge into a single longer run.
        if bands * run + (bands - 1) > n {
            return Err(Error::InvalidInput(format!(
                "{bands} separated runs of {run} bins cannot fit in N = {n}"
            )));
        }
        let mut rng = stream_rng(seed, SCHEME_STREAM);
        for _ in 0..100 {
            let mut starts: Vec<usize> =
                (0..bands).map(|_| rng.random_range(0..=n - run)).collect();
            starts.sort_unstable();
            let disjoint = starts.windows(2).all(|w| w[0] + run < w[1]);
            if disjoint {
                let indices = starts
                    .iter()
                    .flat_map(|&s| s..s + run)
                    .collect();
                return Ok(Self {
                    indices,
                    scheme: Scheme::Multiband { bands },
                });
            }
        }
        Err(Error::InvalidInput(format!(
            "failed to place {bands} disjoint runs of {run} bins in N = {n} after 100 draws"
        )))
    }

    /// Explicit index list; must be sorted and unique.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        let sorted = indices.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            return Err(Error::InvalidInput(
                "kappa indices must be strictly increasing".into(),
            ));
        }
        if indices.is_empty() {
            return Err(Error::EmptyInput("kappa".into()));
        }
        Ok(Self {
            indices,
            scheme: Scheme::Direct,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::EmptyInput("kappa".into()));
        }
        if !self.indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "kappa indices must be strictly increasing".into(),
            ));
        }
        if *self.indices.last().unwrap() >= n {
            return Err(Error::InvalidInput(format!(
                "kappa index {} out of range for N = {n}",
                self.indices.last().unwrap()
            )));
        }
        Ok(())
    }

    /// bin -> row lookup: position_map(n)[k] = Some(row) iff k is the row-th
    /// retained index.
    pub fn position_map(&self, n: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; n];
        for (row, &k) in self.indices.iter().enumerate() {
            map[k] = Some(row);
        }
        map
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "K = {k} must satisfy 1 <= K <= N = {n}"
        )));
    }
    Ok(())
}

/// Select kappa for a configuration under the given scheme.
pub fn select_kappa(
    cfg: &RadarConfig,
    k: usize,
    scheme: Scheme,
    seed: u64,
) -> Result<FrequencyIndexSet> {
    let n = cfg.nyquist_bins();
    match scheme {
        Scheme::Direct => FrequencyIndexSet::direct(n, k, seed),
        Scheme::Lowpass => FrequencyIndexSet::lowpass(n, k),
        Scheme::Multiband { bands } => FrequencyIndexSet::multiband(n, k, bands, seed),
    }
}

/// Fourier coefficients of the received frames on kappa, in kappa order.
#[derive(Debug, Clone)]
pub struct XampledData {
    /// K x P matrix; column p holds c_p[k] for k in kappa order.
    pub coeffs: DMatrix<Complex64>,
    pub kappa: FrequencyIndexSet,
    /// Nyquist bin count N of the generating configuration.
    pub n_bins: usize,
    /// PRI in seconds.
    pub pri_tau: f64,
    /// Transmit spectrum restricted to kappa, same order as rows.
    pub h_kappa: Vec<Complex64>,
}

impl XampledData {
    pub fn pulses(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Row-subset onto a smaller index set; every index of `sub` must
    /// already be present in this data.
    pub fn restrict(&self, sub: &FrequencyIndexSet) -> Result<XampledData> {
        sub.validate_for(self.n_bins)?;
        let pos = self.kappa.position_map(self.n_bins);
        let mut rows = Vec::with_capacity(sub.len());
        for &k in &sub.indices {
            match pos[k] {
                Some(r) => rows.push(r),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "index {k} not present in the source kappa"
                    )))
                }
            }
        }
        let coeffs = DMatrix::from_fn(rows.len(), self.pulses(), |i, p| {
            self.coeffs[(rows[i], p)]
        });
        let h_kappa = rows.iter().map(|&r| self.h_kappa[r]).collect();
        Ok(XampledData {
            coeffs,
            kappa: sub.clone(),
            n_bins: self.n_bins,
            pri_tau: self.pri_tau,
            h_kappa,
        })
    }
}

/// Extract the kappa coefficients of each frame by DFT:
/// c_p[k] = (1/N_s) sum_n r_p[n] e^{-j2pi k n/N_s}. Exact whenever the frame
/// holds at least N samples of the band-limited frame signal.
pub fn xample(
    cfg: &RadarConfig,
    frames: &TimeFrames,
    kappa: &FrequencyIndexSet,
) -> Result<XampledData> {
    let n = cfg.nyquist_bins();
    if frames.n_bins != n {
        return Err(Error::DimensionMismatch(format!(
            "frames were generated for N = {}, configuration has N = {n}",
            frames.n_bins
        )));
    }
    let ns = frames.samples.nrows();
    if ns < n {
        return Err(Error::DimensionMismatch(format!(
            "frame length {ns} below the Nyquist bin count {n}"
        )));
    }
    kappa.validate_for(n)?;
    let p = frames.samples.ncols();
    let mut coeffs = DMatrix::<Complex64>::zeros(kappa.len(), p);
    let scale = 1.0 / ns as f64;
    for pulse in 0..p {
        let mut buf: Vec<Complex64> = frames.samples.column(pulse).iter().copied().collect();
        fft::fft_in_place(&mut buf);
        for (row, &k) in kappa.indices.iter().enumerate() {
            coeffs[(row, pulse)] = buf[k] * scale;
        }
    }
    let h_kappa = kappa.indices.iter().map(|&k| cfg.spectrum()[k]).collect();
    Ok(XampledData {
        coeffs,
        kappa: kappa.clone(),
        n_bins: n,
        pri_tau: cfg.pri_tau(),
        h_kappa,
    })
}

/// True iff the images of the given subbands under folding by `sub_rate_fs`
/// are pairwise disjoint, so a single ADC at f_s can observe all of them
/// without mutual aliasing. Bands are half-open (lo, hi) pairs in Hz.
///
/// Exact duplicate bands fold onto themselves and simply return false;
/// partially overlapping input bands are rejected as invalid.
pub fn check_coset_alias_free(band_edges: &[(f64, f64)], sub_rate_fs: f64) -> Result<bool> {
    if band_edges.is_empty() {
        return Err(Error::EmptyInput("band list".into()));
    }
    if !(sub_rate_fs.is_finite() && sub_rate_fs > 0.0) {
        return Err(Error::InvalidInput(format!(
            "fold rate must be > 0, got {sub_rate_fs}"
        )));
    }
    for (i, &(lo, hi)) in band_edges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidInput(format!(
                "band {i}: edges ({lo}, {hi}) must satisfy 0 <= lo < hi"
            )));
        }
    }
    for i in 0..band_edges.len() {
        for j in (i + 1)..band_edges.len() {
            if band_edges[i] == band_edges[j] {
                return Ok(false);
            }
            let (alo, ahi) = band_edges[i];
            let (blo, bhi) = band_edges[j];
            if alo < bhi && blo < ahi {
                return Err(Error::InvalidInput(format!(
                    "bands {i} and {j} overlap before folding"
                )));
            }
        }
    }

    // Split each band at multiples of f_s; each piece folds to a single
    // half-open interval in [0, f_s).
    let mut pieces: Vec<(usize, f64, f64)> = Vec::new();
    for (band, &(lo, hi)) in band_edges.iter().enumerate() {
        let mut cursor = lo;
        while cursor < hi {
            let cell = (cursor / sub_rate_fs).floor();
            let cell_end = (cell + 1.0) * sub_rate_fs;
            let stop = cell_end.min(hi);
            let flo = cursor - cell * sub_rate_fs;
            let fhi = flo + (stop - cursor);
            if fhi > flo {
                pieces.push((band, flo, fhi));
            }
            cursor = stop;
        }
    }
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            let (_, alo, ahi) = pieces[i];
            let (_, blo, bhi) = pieces[j];
            if alo < bhi && blo < ahi {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
