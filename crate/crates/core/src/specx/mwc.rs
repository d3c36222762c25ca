//! Modulated wideband converter: low-rate spectrum sensing with a partially
//! known support.
//!
//! The wideband input is split into N spectral slices of width f_p,
//!   x_n(f) = X(f + (n + 1 - N/2) f_p),  f in [-f_p/2, f_p/2), n = 0..N-1,
//! and each hardware channel mixes the input with a periodic +-1 chip
//! sequence before lowpass filtering and sampling at f_s. In the frequency
//! domain every channel observes a fixed linear combination of the slices,
//!   z(f) = A x(f),
//! where A collects the mixing-sequence Fourier coefficients. Slice support
//! is recovered from the sample covariance of z (the CTF frame), and the
//! radar's own transmit bands enter as a known part of the support that
//! seeds the greedy search instead of competing with it.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use super::{BandRole, SpectralMap};
use crate::pursuit::lstsq;
use crate::rng::{stream_rng, SCHEME_STREAM};
use crate::{Error, Result};

/// Modulated wideband converter front end.
///
/// Slice count N = 2 ceil((f_Nyq + f_s) / (2 f_p)) is always even, so the
/// slice with 0 Hz at its left edge has 0-based index N/2 - 1. The chip
/// sequences are seeded pseudorandom +-1 words of length N per period;
/// their small mutual coherence is what makes slice mixtures separable.
#[derive(Debug, Clone)]
pub struct MwcConfig {
    channels: usize,
    period_hz: f64,
    sample_rate_hz: f64,
    nyquist_hz: f64,
    slices: usize,
    chips: DMatrix<f64>,
    /// Column l + span holds c_{i,l}, the harmonic-l Fourier coefficient of
    /// channel i's chip waveform.
    coeffs: DMatrix<Complex64>,
    span: usize,
    seed: u64,
}

impl MwcConfig {
    pub fn new(
        channels: usize,
        period_hz: f64,
        sample_rate_hz: f64,
        nyquist_hz: f64,
        seed: u64,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidInput("need at least one channel".into()));
        }
        if !(period_hz.is_finite() && period_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mixing period rate must be > 0, got {period_hz}"
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz >= period_hz) {
            return Err(Error::InvalidInput(format!(
                "sample rate {sample_rate_hz} must be >= the mixing rate {period_hz}"
            )));
        }
        if !(nyquist_hz.is_finite() && nyquist_hz > sample_rate_hz) {
            return Err(Error::InvalidInput(format!(
                "Nyquist rate {nyquist_hz} must exceed the sample rate"
            )));
        }
        let slices = 2 * ((nyquist_hz + sample_rate_hz) / (2.0 * period_hz)).ceil() as usize;
        let expansion = (sample_rate_hz / period_hz).round() as usize - 1;
        let span = slices / 2 + expansion / 2;
        let chip_count = slices;
        // d_l = 0 only at nonzero multiples of the chip count; the harmonic
        // window stays strictly inside the first null.
        debug_assert!(span < chip_count);

        let mut rng = stream_rng(seed, SCHEME_STREAM);
        let chips = DMatrix::<f64>::from_fn(channels, chip_count, |_, _| {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        });

        let mut coeffs = DMatrix::<Complex64>::zeros(channels, 2 * span + 1);
        let two_pi = 2.0 * std::f64::consts::PI;
        for (col, l) in (-(span as i64)..=span as i64).enumerate() {
            // Exact Fourier coefficient of the piecewise-constant chip
            // waveform: c_{il} = sum_m b_{im} e^{-j 2 pi l m / Nc} d_l with
            // d_0 = 1/Nc and d_l = (1 - e^{-j 2 pi l / Nc}) / (j 2 pi l).
            let d = if l == 0 {
                Complex64::new(1.0 / chip_count as f64, 0.0)
            } else {
                let step = Complex64::from_polar(1.0, -two_pi * l as f64 / chip_count as f64);
                (Complex64::new(1.0, 0.0) - step) / Complex64::new(0.0, two_pi * l as f64)
            };
            for i in 0..channels {
                let mut sum = Complex64::new(0.0, 0.0);
                for m in 0..chip_count {
                    let w = Complex64::from_polar(
                        1.0,
                        -two_pi * (l as f64) * (m as f64) / chip_count as f64,
                    );
                    sum += chips[(i, m)] * w;
                }
                coeffs[(i, col)] = sum * d;
            }
        }

        Ok(Self {
            channels,
            period_hz,
            sample_rate_hz,
            nyquist_hz,
            slices,
            chips,
            coeffs,
            span,
            seed,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn period_hz(&self) -> f64 {
        self.period_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.nyquist_hz
    }

    /// Slice count N (always even).
    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Digital expansion factor q = round(f_s / f_p) - 1: the number of
    /// virtual channels each hardware channel yields when f_s = (q+1) f_p.
    pub fn expansion(&self) -> usize {
        (self.sample_rate_hz / self.period_hz).round() as usize - 1
    }

    /// Chip word of one channel (one mixing period).
    pub fn chip_sequence(&self, channel: usize) -> Vec<f64> {
        self.chips.row(channel).iter().cloned().collect()
    }

    /// Fourier coefficient c_{il} of channel `channel`'s chip waveform, or
    /// None outside the precomputed harmonic window.
    pub fn mixing_coefficient(&self, channel: usize, harmonic: i64) -> Option<Complex64> {
        if channel >= self.channels || harmonic.unsigned_abs() as usize > self.span {
            return None;
        }
        Some(self.coeffs[(channel, (harmonic + self.span as i64) as usize)])
    }

    /// Signed harmonic index of slice `n`: the slice content is the input
    /// spectrum shifted down by l(n) f_p.
    fn harmonic_of(&self, n: usize) -> i64 {
        n as i64 + 1 - (self.slices / 2) as i64
    }

    /// Center frequency of slice `n` in Hz (negative for the lower half).
    pub fn slice_center(&self, n: usize) -> f64 {
        self.harmonic_of(n) as f64 * self.period_hz
    }

    /// Index of the slice holding the mirrored (negative-frequency) image
    /// of slice `n`; real inputs occupy slices in such pairs. The topmost
    /// slice (index N-1) has no on-grid mirror: the even grid spans one
    /// more positive than negative harmonic.
    pub fn mirror_slice(&self, n: usize) -> usize {
        debug_assert!(n + 2 <= self.slices, "slice {n} has no on-grid mirror");
        self.slices - n - 2
    }

    /// Hardware sensing matrix: A[i, n] = conj(c_{i, l(n)}).
    pub fn sensing_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.channels, self.slices, |i, n| {
            self.mixing_coefficient(i, self.harmonic_of(n))
                .expect("harmonic window covers every slice")
                .conj()
        })
    }

    /// Virtual sensing matrix after digital expansion: row (i, r) observes
    /// channel i shifted by r f_p, with shifts r = -(q-1)/2 ..= (q-1)/2, so
    /// entry ((i, r), n) = conj(c_{i, l(n) - r}). Requires an odd expansion
    /// factor q >= 1 (f_s an even multiple of f_p gives a symmetric shift
    /// set around zero).
    pub fn virtual_sensing_matrix(&self) -> Result<DMatrix<Complex64>> {
        let q = self.expansion();
        if q == 0 || q % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "digital expansion needs an odd factor >= 1, got q = {q}"
            )));
        }
        let half = (q / 2) as i64;
        let mut a = DMatrix::<Complex64>::zeros(self.channels * q, self.slices);
        for i in 0..self.channels {
            for (pos, r) in (-half..=half).enumerate() {
                for n in 0..self.slices {
                    a[(i * q + pos, n)] = self
                        .mixing_coefficient(i, self.harmonic_of(n) - r)
                        .expect("harmonic window covers every virtual shift")
                        .conj();
                }
            }
        }
        Ok(a)
    }
}

/// Channel outputs per frequency bin: z = A x, one column per bin of the
/// slice grid.
pub fn mwc_sample(slices: &DMatrix<Complex64>, cfg: &MwcConfig) -> Result<DMatrix<Complex64>> {
    if slices.nrows() != cfg.slices() {
        return Err(Error::DimensionMismatch(format!(
            "slice grid has {} rows, converter expects {}",
            slices.nrows(),
            cfg.slices()
        )));
    }
    Ok(cfg.sensing_matrix() * slices)
}

/// Frame factor of the sample covariance: Q = z z^H is eigendecomposed and
/// the eigenvectors with eigenvalues >= 1e-6 lambda_max are scaled by the
/// square roots of their eigenvalues, so V V^H = Q up to the discarded tail.
/// The returned V is a compact stand-in for the raw snapshots in the
/// multiple-measurement recovery.
pub fn ctf_frame(z: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if z.ncols() < z.nrows() {
        return Err(Error::InvalidInput(format!(
            "need at least {} snapshots to form the frame, got {}",
            z.nrows(),
            z.ncols()
        )));
    }
    let q = z * z.adjoint();
    let eig = SymmetricEigen::new(q);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::EmptyInput("empty frame".into()));
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] >= 1e-6 * lambda_max)
        .collect();
    let mut v = DMatrix::<Complex64>::zeros(z.nrows(), kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        v.set_column(col, &(eig.eigenvectors.column(i) * Complex64::new(scale, 0.0)));
    }
    Ok(v)
}

/// Slice indices that can carry energy from the radar transmit bands: for a
/// band with center f_r and width B, the 1-based indices n with
/// |n - f_r/f_p - N/2| < (f_s + B) / (2 f_p), returned 0-based and sorted.
/// Bands must lie in [0, f_Nyq/2]; mirrored (negative-frequency) slices are
/// the caller's business via [`MwcConfig::mirror_slice`].
pub fn radar_slice_support(fr: &SpectralMap, cfg: &MwcConfig) -> Result<Vec<usize>> {
    let half_nyq = cfg.nyquist_hz() / 2.0;
    let mut out = Vec::new();
    for &(lo, hi) in &fr.bands {
        if lo < 0.0 || hi > half_nyq {
            return Err(Error::InvalidInput(format!(
                "band ({lo}, {hi}) outside the positive Nyquist range [0, {half_nyq}]"
            )));
        }
        let center = 0.5 * (lo + hi) / cfg.period_hz() + (cfg.slices() / 2) as f64;
        let radius = (cfg.sample_rate_hz() + (hi - lo)) / (2.0 * cfg.period_hz());
        let first = ((center - radius).floor() as i64 + 1).max(1);
        let last = ((center + radius).ceil() as i64 - 1).min(cfg.slices() as i64);
        for n in first..=last {
            out.push(n as usize - 1);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Result of support recovery with a known (seeded) part.
#[derive(Debug, Clone)]
pub struct KnownSupportRecovery {
    /// Newly detected slice indices, sorted, excluding the seeds.
    pub comm_slices: Vec<usize>,
    /// Least-squares refit of the input on the final support, scattered to
    /// the full slice grid (zero rows off support).
    pub slices: DMatrix<Complex64>,
    /// Frobenius residual trace; the first entry is the input norm.
    pub residual_trace: Vec<f64>,
}

/// Greedy multiple-measurement support recovery seeded with the known slice
/// set `s_r`: the seeds are fitted and subtracted first, then standard
/// matched-filter selection grows the support until the residual drops
/// below `rel_tol` times the input norm.
///
/// Fails when the seed set is not independent or not smaller than the
/// channel count, when no remaining slice reduces the residual, or when the
/// support would exceed what the channel count can carry.
pub fn support_recover_known(
    v: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    s_r: &[usize],
    rel_tol: f64,
) -> Result<KnownSupportRecovery> {
    if v.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} rows, sensing matrix has {}",
            v.nrows(),
            a.nrows()
        )));
    }
    if !(rel_tol.is_finite() && rel_tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "relative tolerance must be >= 0, got {rel_tol}"
        )));
    }
    let m = a.nrows();
    let mut support: Vec<usize> = s_r.to_vec();
    support.sort_unstable();
    support.dedup();
    if support.iter().any(|&n| n >= a.ncols()) {
        return Err(Error::InvalidInput("seed slice index out of range".into()));
    }
    if support.len() >= m {
        return Err(Error::InvalidInput(format!(
            "known support has {} slices, must stay below the {m} channels",
            support.len()
        )));
    }
    if !support.is_empty() {
        let seeds = a.select_columns(support.iter());
        let svd = seeds.svd(false, false);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let min_sv = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
        if max_sv <= 0.0 || min_sv <= 1e-10 * max_sv {
            return Err(Error::InvalidInput(
                "seed slices are not linearly independent across channels".into(),
            ));
        }
    }

    let norm_v = v.norm();
    let tol = rel_tol * norm_v;
    let mut trace = vec![norm_v];
    let cap = m.min(a.ncols());

    let refit = |support: &[usize]| -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let cols = a.select_columns(support.iter());
        let u = lstsq(&cols, v)?;
        let r = v - cols * &u;
        Ok((u, r))
    };

    let (mut fit, mut residual) = if support.is_empty() {
        (DMatrix::zeros(0, v.ncols()), v.clone())
    } else {
        let (u, r) = refit(&support)?;
        trace.push(r.norm());
        (u, r)
    };

    loop {
        let res_norm = residual.norm();
        if res_norm <= tol {
            break;
        }
        if support.len() >= cap {
            return Err(Error::BudgetExceeded(format!(
                "support reached {} slices (channel budget {m}) with residual {res_norm:.3e}",
                support.len()
            )));
        }
        let mut best: Option<(usize, f64)> = None;
        for n in 0..a.ncols() {
            if support.contains(&n) {
                continue;
            }
            let col = a.column(n);
            let den = col.norm_squared();
            if den == 0.0 {
                continue;
            }
            let num = (col.adjoint() * &residual).norm_squared();
            let score = num / den;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((n, score));
            }
        }
        let (pick, score) = best.ok_or_else(|| {
            Error::ResidualStalled("no unselected slice is available".into())
        })?;
        if score <= (1e-15 * norm_v).powi(2) {
            return Err(Error::ResidualStalled(format!(
                "no remaining slice correlates with the residual ({res_norm:.3e})"
            )));
        }
        support.push(pick);
        support.sort_unstable();
        let (u, r) = refit(&support)?;
        let new_norm = r.norm();
        trace.push(new_norm);
        if new_norm >= res_norm * (1.0 - 1e-12) && new_norm > tol {
            return Err(Error::ResidualStalled(format!(
                "residual stuck at {new_norm:.3e} after adding slice {pick}"
            )));
        }
        fit = u;
        residual = r;
    }

    let mut slices = DMatrix::<Complex64>::zeros(a.ncols(), v.ncols());
    for (row, &n) in support.iter().enumerate() {
        if fit.nrows() > row {
            slices.set_row(n, &fit.row(row));
        }
    }
    let seed_set: std::collections::BTreeSet<usize> = s_r.iter().cloned().collect();
    let comm_slices: Vec<usize> = support
        .iter()
        .cloned()
        .filter(|n| !seed_set.contains(n))
        .collect();
    Ok(KnownSupportRecovery {
        comm_slices,
        slices,
        residual_trace: trace,
    })
}

/// Least-squares reconstruction of the slice contents on a known support:
/// rows of the result hold A_S^+ z on the support and zeros elsewhere.
pub fn reconstruct_slices(
    z: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    support: &[usize],
) -> Result<DMatrix<Complex64>> {
    if z.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} rows, sensing matrix has {}",
            z.nrows(),
            a.nrows()
        )));
    }
    let mut sup: Vec<usize> = support.to_vec();
    sup.sort_unstable();
    sup.dedup();
    if sup.iter().any(|&n| n >= a.ncols()) {
        return Err(Error::InvalidInput("slice index out of range".into()));
    }
    let mut out = DMatrix::<Complex64>::zeros(a.ncols(), z.ncols());
    if sup.is_empty() {
        return Ok(out);
    }
    let cols = a.select_columns(sup.iter());
    let u = lstsq(&cols, z)?;
    for (row, &n) in sup.iter().enumerate() {
        out.set_row(n, &u.row(row));
    }
    Ok(out)
}

/// Frequency bands covered by a set of slices: each slice contributes its
/// f_p-wide interval and runs of adjacent slices coalesce into one band.
pub fn slice_bands(slices: &[usize], cfg: &MwcConfig) -> Result<SpectralMap> {
    let mut sorted: Vec<usize> = slices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.iter().any(|&n| n >= cfg.slices()) {
        return Err(Error::InvalidInput("slice index out of range".into()));
    }
    let mut bands: Vec<(f64, f64)> = Vec::new();
    let half = cfg.period_hz() / 2.0;
    for &n in &sorted {
        let lo = cfg.slice_center(n) - half;
        let hi = cfg.slice_center(n) + half;
        match bands.last_mut() {
            Some(last) if lo <= last.1 + 1e-9 * cfg.period_hz() => last.1 = hi,
            _ => bands.push((lo, hi)),
        }
    }
    SpectralMap::new(BandRole::Communication, bands)
}
