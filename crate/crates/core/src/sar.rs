//! Range-Doppler SAR processing with Fourier-domain range cell migration
//! correction.
//!
//! The classic pipeline is range compression, azimuth DFT, RCMC, azimuth
//! matched filter, inverse azimuth DFT. RCMC resamples each Doppler column
//! at positions n(1 + a k^2); `rcmc_interp` does that by band-limited
//! (Dirichlet) interpolation and is kept as the oracle, `rcmc_fourier`
//! computes the same correction directly on Fourier coefficients from a
//! small window of neighbours per output, which is what makes sub-Nyquist
//! acquisition possible: only the retained coefficients are ever touched.
//!
//! Conventions: unit sample time, so a pulse interval holds N samples and
//! Fourier coefficients are X[l] = (1/N) sum_n x[n] e^{-j2pi ln/N} on the
//! signed index grid. Simulated ranges are measured in range bins (one bin
//! = one two-way delay sample); geometry lengths share that unit.
//!
//! The coefficient-domain RCMC kernel here is the periodic (Dirichlet)
//! sinc D_N rather than the aperiodic sinc of the continuous derivation:
//! D_N is exactly the DFT of Dirichlet resampling, so the full-window
//! Fourier path reproduces the interpolation oracle to machine precision
//! instead of only asymptotically. The aperiodic sinc is its large-N
//! limit. The kernel phase uses the output index, which is the variant
//! that keeps zero-Doppler columns exactly unchanged.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fft::{fft, ifft, signed_index};
use crate::xampling::{FrequencyIndexSet, XampledData};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Stripmap acquisition geometry: platform speed, pulse interval, number
/// of along-track positions (spaced by velocity * pri each), and carrier
/// wavelength, all in consistent units.
#[derive(Debug, Clone, PartialEq)]
pub struct SarGeometry {
    velocity: f64,
    pri: f64,
    positions: usize,
    wavelength: f64,
}

impl SarGeometry {
    pub fn new(velocity: f64, pri: f64, positions: usize, wavelength: f64) -> Result<Self> {
        if !(velocity.is_finite() && pri.is_finite() && wavelength.is_finite()) {
            return Err(Error::InvalidInput("geometry values must be finite".into()));
        }
        if velocity <= 0.0 || pri <= 0.0 || wavelength <= 0.0 {
            return Err(Error::InvalidInput(
                "velocity, pri and wavelength must be positive".into(),
            ));
        }
        if positions < 2 {
            return Err(Error::InvalidInput(
                "need at least two along-track positions".into(),
            ));
        }
        Ok(Self {
            velocity,
            pri,
            positions,
            wavelength,
        })
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn pri(&self) -> f64 {
        self.pri
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Stripmap range-scaling constant a = wl^2 / (8 v^2 T^2 M^2): Doppler
    /// bin k sees the range axis stretched by 1 + a k^2. (Dimensional
    /// analysis forces the squared speed; a is dimensionless.)
    pub fn scale_a(&self) -> f64 {
        let vt = self.velocity * self.pri;
        self.wavelength * self.wavelength
            / (8.0 * vt * vt * (self.positions * self.positions) as f64)
    }

    /// Azimuth chirp rates per range bin, in DFT-index units: a scatterer
    /// at range R has quadratic phase -pi (vT)^2 m^2 * 2/(wl R) across the
    /// aperture, which the M-point DFT turns into +pi k^2 / K_a with
    /// K_a = 2 (vTM)^2 / (wl R).
    pub fn azimuth_chirp_rates(&self, ranges: &[f64]) -> Result<Vec<f64>> {
        let vtm = self.velocity * self.pri * self.positions as f64;
        ranges
            .iter()
            .map(|&r| {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "range {r} is not positive and finite"
                    )));
                }
                Ok(2.0 * vtm * vtm / (self.wavelength * r))
            })
            .collect()
    }
}

/// Raw data cube: N range samples (or N Fourier coefficients) by M
/// along-track positions.
#[derive(Debug, Clone)]
pub struct RawSarData {
    samples: DMatrix<Complex64>,
    fourier: bool,
}

impl RawSarData {
    fn checked(samples: DMatrix<Complex64>, geometry: &SarGeometry, fourier: bool) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("raw data".into()));
        }
        if samples.ncols() != geometry.positions() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} columns, geometry has {} positions",
                samples.ncols(),
                geometry.positions()
            )));
        }
        Ok(Self { samples, fourier })
    }

    /// Time-domain samples d[n, m].
    pub fn time(samples: DMatrix<Complex64>, geometry: &SarGeometry) -> Result<Self> {
        Self::checked(samples, geometry, false)
    }

    /// Fourier coefficients D_m[l] per column.
    pub fn fourier(coeffs: DMatrix<Complex64>, geometry: &SarGeometry) -> Result<Self> {
        Self::checked(coeffs, geometry, true)
    }

    pub fn samples(&self) -> &DMatrix<Complex64> {
        &self.samples
    }

    pub fn is_fourier(&self) -> bool {
        self.fourier
    }

    /// Per-column coefficients X[l] = (1/N) sum_n x[n] e^{-j2pi ln/N}.
    pub fn to_fourier(&self) -> RawSarData {
        if self.fourier {
            return self.clone();
        }
        RawSarData {
            samples: map_columns(&self.samples, |col| {
                let n = col.len() as f64;
                fft(col).into_iter().map(|v| v / n).collect()
            }),
            fourier: true,
        }
    }

    /// Per-column series evaluation x[n] = sum_l X[l] e^{j2pi ln/N}.
    pub fn to_time(&self) -> RawSarData {
        if !self.fourier {
            return self.clone();
        }
        RawSarData {
            samples: map_columns(&self.samples, |col| ifft(col)),
            fourier: false,
        }
    }

    /// Pack the Fourier form plus the pulse spectrum into the coefficient
    /// container (full index grid, pulse coefficients as the spectrum row).
    pub fn to_container(&self, geometry: &SarGeometry, pulse: &[Complex64]) -> Result<XampledData> {
        let four = self.to_fourier();
        let n = four.samples.nrows();
        if pulse.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "pulse has {} samples, data rows want {n}",
                pulse.len()
            )));
        }
        let nf = n as f64;
        let h_kappa: Vec<Complex64> = fft(pulse).into_iter().map(|v| v / nf).collect();
        Ok(XampledData {
            coeffs: four.samples,
            kappa: FrequencyIndexSet::full(n),
            n_bins: n,
            pri_tau: geometry.pri(),
            h_kappa,
        })
    }

    /// Inverse of `to_container`: recover the Fourier-form data and the
    /// time-domain pulse. The container must hold the full index grid.
    pub fn from_container(
        data: &XampledData,
        geometry: &SarGeometry,
    ) -> Result<(RawSarData, Vec<Complex64>)> {
        let n = data.coeffs.nrows();
        if data.n_bins != n || data.kappa.indices.iter().enumerate().any(|(i, &k)| k != i) {
            return Err(Error::InvalidInput(
                "container does not hold a full coefficient grid".into(),
            ));
        }
        if data.h_kappa.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "container spectrum has {} entries, coefficients have {n} rows",
                data.h_kappa.len()
            )));
        }
        let raw = RawSarData::fourier(data.coeffs.clone(), geometry)?;
        Ok((raw, ifft(&data.h_kappa)))
    }
}

fn map_columns<F>(m: &DMatrix<Complex64>, f: F) -> DMatrix<Complex64>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut out = m.clone();
    for c in 0..m.ncols() {
        let col: Vec<Complex64> = m.column(c).iter().cloned().collect();
        out.set_column(c, &nalgebra::DVector::from_vec(f(&col)));
    }
    out
}

fn validate_pulse(pulse: &[Complex64], rows: usize) -> Result<()> {
    if rows == 0 {
        return Err(Error::EmptyInput("raw data".into()));
    }
    if pulse.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "pulse has {} samples, data has {rows} rows",
            pulse.len()
        )));
    }
    if pulse.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::InvalidInput("pulse is identically zero".into()));
    }
    Ok(())
}

/// Range compression: circular matched filter of every column with the
/// pulse, s[n, m] = sum_{n'} d[n', m] conj(h[n' - n]).
pub fn range_compress(raw: &DMatrix<Complex64>, pulse: &[Complex64]) -> Result<DMatrix<Complex64>> {
    validate_pulse(pulse, raw.nrows())?;
    let n = raw.nrows() as f64;
    let h_fft = fft(pulse);
    Ok(map_columns(raw, |col| {
        let mut spec = fft(col);
        for (v, h) in spec.iter_mut().zip(h_fft.iter()) {
            *v *= h.conj();
        }
        ifft(&spec).into_iter().map(|v| v / n).collect()
    }))
}

/// Fourier-domain range compression on coefficient columns:
/// D~_m[l] = N D_m[l] conj(H[l]), the exact DFT of the time path.
pub fn range_compress_fourier(
    coeffs: &DMatrix<Complex64>,
    pulse_coeffs: &[Complex64],
) -> Result<DMatrix<Complex64>> {
    validate_pulse(pulse_coeffs, coeffs.nrows())?;
    let n = coeffs.nrows() as f64;
    let mut out = coeffs.clone();
    for c in 0..out.ncols() {
        for r in 0..out.nrows() {
            out[(r, c)] *= n * pulse_coeffs[r].conj();
        }
    }
    Ok(out)
}

/// Azimuth DFT along rows: S[n, k] = sum_m s[n, m] e^{-j2pi km/M}.
pub fn azimuth_dft(s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    transform_rows(s, fft, 1.0)
}

/// Inverse azimuth DFT along rows, with the 1/M factor.
pub fn azimuth_idft(s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let m = s.ncols().max(1) as f64;
    transform_rows(s, ifft, 1.0 / m)
}

fn transform_rows(
    s: &DMatrix<Complex64>,
    f: fn(&[Complex64]) -> Vec<Complex64>,
    scale: f64,
) -> DMatrix<Complex64> {
    if s.is_empty() {
        return s.clone();
    }
    let mut out = s.clone();
    for r in 0..s.nrows() {
        let row: Vec<Complex64> = s.row(r).iter().cloned().collect();
        for (c, v) in f(&row).into_iter().enumerate() {
            out[(r, c)] = v * scale;
        }
    }
    out
}

/// Periodic sinc D_N(x) = (1/N) sum_{n=0}^{N-1} e^{j2pi xn/N}: one at
/// multiples of N, zero at other integers.
fn dirichlet(x: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let cycles = x / nf;
    if (cycles - cycles.round()).abs() < 1e-12 {
        return Complex64::new(1.0, 0.0);
    }
    let ratio = (PI * x).sin() / (nf * (PI * x / nf).sin());
    Complex64::from_polar(1.0, PI * x * (nf - 1.0) / nf) * ratio
}

/// Resample every column's band-limited model at positions n * scale(k),
/// the shared core of both RCMC paths.
fn resample_columns(s: &DMatrix<Complex64>, scales: &[f64]) -> DMatrix<Complex64> {
    let n = s.nrows();
    let mut out = s.clone();
    for (k, &gamma) in scales.iter().enumerate() {
        let col: Vec<Complex64> = s.column(k).iter().cloned().collect();
        let nf = n as f64;
        let coeffs: Vec<Complex64> = fft(&col).into_iter().map(|v| v / nf).collect();
        for row in 0..n {
            let pos = row as f64 * gamma;
            let mut acc = Complex64::default();
            for (l, &cl) in coeffs.iter().enumerate() {
                let ls = signed_index(l, n) as f64;
                acc += cl * Complex64::from_polar(1.0, TWO_PI * ls * pos / nf);
            }
            out[(row, k)] = acc;
        }
    }
    out
}

fn column_scales(geometry: &SarGeometry, cols: usize) -> Vec<f64> {
    let a = geometry.scale_a();
    (0..cols)
        .map(|k| {
            let kc = signed_index(k, cols) as f64;
            1.0 + a * kc * kc
        })
        .collect()
}

/// Interpolation RCMC (the oracle): C~[n, k] = S[n(1 + a k^2), k] with the
/// non-integer positions evaluated by Dirichlet interpolation of each
/// Doppler column. Doppler index k is centered before squaring.
pub fn rcmc_interp(s: &DMatrix<Complex64>, geometry: &SarGeometry) -> DMatrix<Complex64> {
    if s.is_empty() {
        return s.clone();
    }
    resample_columns(s, &column_scales(geometry, s.ncols()))
}

/// Fourier-domain RCMC: every output coefficient of the scaled column is a
/// windowed combination of the input coefficients,
/// C_k[l] = sum_n S_k[n] D_N(n(1 + a k^2) - l), with the 2W+1 signed
/// indices n nearest l/(1 + a k^2). The kernel peaks where the scaled
/// index lands on l, so the window centre is round(l / gamma); with the
/// full window (2W+1 >= N) the sum is the exact DFT of the interpolation
/// oracle, and at zero Doppler it collapses to the identity.
pub fn rcmc_fourier(
    s_coeffs: &DMatrix<Complex64>,
    geometry: &SarGeometry,
    half_width: usize,
) -> Result<DMatrix<Complex64>> {
    if half_width == 0 {
        return Err(Error::InvalidInput(
            "window half-width must be at least 1".into(),
        ));
    }
    if s_coeffs.is_empty() {
        return Err(Error::EmptyInput("coefficients".into()));
    }
    let n = s_coeffs.nrows();
    let ni = n as i64;
    let lo_valid = -(ni / 2);
    let hi_valid = (ni - 1) / 2;
    let scales = column_scales(geometry, s_coeffs.ncols());
    let mut out = DMatrix::zeros(n, s_coeffs.ncols());
    for (k, &gamma) in scales.iter().enumerate() {
        for l in 0..n {
            let ls = signed_index(l, n);
            let centre = (ls as f64 / gamma).round() as i64;
            let (win_lo, win_hi) = if 2 * half_width + 1 >= n {
                (lo_valid, hi_valid)
            } else {
                let w = half_width as i64;
                ((centre - w).max(lo_valid), (centre + w).min(hi_valid))
            };
            let mut acc = Complex64::default();
            for ns in win_lo..=win_hi {
                let row = if ns < 0 { ns + ni } else { ns } as usize;
                acc += s_coeffs[(row, k)] * dirichlet(ns as f64 * gamma - ls as f64, n);
            }
            out[(l, k)] = acc;
        }
    }
    Ok(out)
}

/// Azimuth matched filter and imaging: Y[n, k] = C~[n, k] e^{-j pi k^2 /
/// Ka[n]} with centered k, then an inverse azimuth DFT.
pub fn azimuth_compress_and_image(
    c: &DMatrix<Complex64>,
    ka: &[f64],
) -> Result<DMatrix<Complex64>> {
    if c.is_empty() {
        return Err(Error::EmptyInput("range-Doppler data".into()));
    }
    if ka.len() != c.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "chirp-rate map has {} entries, data has {} rows",
            ka.len(),
            c.nrows()
        )));
    }
    if let Some(bad) = ka.iter().find(|v| !v.is_finite() || **v == 0.0) {
        return Err(Error::InvalidInput(format!(
            "azimuth chirp rate {bad} is zero or not finite"
        )));
    }
    let m = c.ncols();
    let mut y = c.clone();
    for r in 0..c.nrows() {
        for k in 0..m {
            let kc = signed_index(k, m) as f64;
            y[(r, k)] *= Complex64::from_polar(1.0, -PI * kc * kc / ka[r]);
        }
    }
    Ok(azimuth_idft(&y))
}

/// Baseband chirp of `len` samples sweeping `band` of the sampling rate,
/// centered so the instantaneous frequency runs -band/2 .. band/2.
pub fn chirp_pulse(len: usize, band: f64) -> Result<Vec<Complex64>> {
    if len < 2 {
        return Err(Error::InvalidInput("chirp needs at least 2 samples".into()));
    }
    if !(band > 0.0 && band <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "chirp band {band} must be in (0, 1]"
        )));
    }
    let rate = band / len as f64;
    let centre = (len as f64 - 1.0) / 2.0;
    Ok((0..len)
        .map(|i| {
            let t = i as f64 - centre;
            Complex64::from_polar(1.0, PI * rate * t * t)
        })
        .collect())
}

/// A simulated stripmap acquisition of one point scatterer, plus the
/// per-bin range map the azimuth compressor needs.
#[derive(Debug, Clone)]
pub struct SarScene {
    pub geometry: SarGeometry,
    /// Transmit pulse, zero-padded to the range window.
    pub pulse: Vec<Complex64>,
    /// Time-domain data cube, range bins x positions.
    pub raw: RawSarData,
    /// Range of each bin (bin zero floored to one bin to keep chirp rates
    /// finite; nothing is ever imaged there).
    pub ranges: Vec<f64>,
    pub target_bin: f64,
    pub target_pulse: f64,
}

/// Simulate one point target on an exact hyperbolic trajectory
/// R_m = sqrt(R0^2 + ((m - m0) v T)^2), sampled with band-limited
/// fractional delays and phase e^{-j4pi R_m / wl}. Ranges are in bins.
pub fn point_target_scene(
    geometry: SarGeometry,
    range_bins: usize,
    pulse_len: usize,
    pulse_band: f64,
    target_bin: f64,
    target_pulse: f64,
    amplitude: Complex64,
) -> Result<SarScene> {
    if range_bins < 8 {
        return Err(Error::InvalidInput("need at least 8 range bins".into()));
    }
    if pulse_len >= range_bins {
        return Err(Error::InvalidInput(
            "pulse must be shorter than the range window".into(),
        ));
    }
    if !(target_bin.is_finite() && target_bin >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "target bin {target_bin} must be finite and at least one bin out"
        )));
    }
    if !target_pulse.is_finite() || !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
        return Err(Error::InvalidInput(
            "target pulse index and amplitude must be finite".into(),
        ));
    }
    let m_count = geometry.positions();
    let step = geometry.velocity() * geometry.pri();
    let trajectory: Vec<f64> = (0..m_count)
        .map(|m| {
            let x = (m as f64 - target_pulse) * step;
            (target_bin * target_bin + x * x).sqrt()
        })
        .collect();
    let max_r = trajectory.iter().cloned().fold(0.0, f64::max);
    if max_r + pulse_len as f64 > range_bins as f64 {
        return Err(Error::InvalidInput(
            "trajectory leaves the range window".into(),
        ));
    }
    // Band-limited delays are only faithful while the pulse-to-pulse phase
    // advance stays inside the unambiguous Doppler band.
    let wl = geometry.wavelength();
    for pair in trajectory.windows(2) {
        if 2.0 * (pair[1] - pair[0]).abs() / wl > 0.5 {
            return Err(Error::InvalidInput(
                "azimuth phase history aliases; slow the platform or widen the wavelength".into(),
            ));
        }
    }
    let mut pulse = chirp_pulse(pulse_len, pulse_band)?;
    pulse.resize(range_bins, Complex64::default());
    let h_fft = fft(&pulse);
    let n = range_bins;
    let nf = n as f64;
    let mut raw = DMatrix::<Complex64>::zeros(n, m_count);
    for (m, &r) in trajectory.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -4.0 * PI * r / wl) * amplitude;
        let shifted: Vec<Complex64> = h_fft
            .iter()
            .enumerate()
            .map(|(l, &h)| {
                let ls = signed_index(l, n) as f64;
                h * Complex64::from_polar(1.0, -TWO_PI * ls * r / nf)
            })
            .collect();
        for (row, v) in ifft(&shifted).into_iter().enumerate() {
            raw[(row, m)] = v / nf * phase;
        }
    }
    let ranges = (0..n).map(|i| i.max(1) as f64).collect();
    let raw = RawSarData::time(raw, &geometry)?;
    Ok(SarScene {
        geometry,
        pulse,
        raw,
        ranges,
        target_bin,
        target_pulse,
    })
}

/// The canonical 64 x 32 point-target scene: five bins of range walk at
/// the Doppler edge, 0.8-band chirp, target at bin 40, position 16.
pub fn desk_scene() -> SarScene {
    let geometry = SarGeometry::new(0.0125, 64.0, 32, 1.6).unwrap();
    point_target_scene(geometry, 64, 16, 0.8, 40.0, 16.0, Complex64::new(1.0, 0.0)).unwrap()
}

/// Classic RDA: time-domain range compression, azimuth DFT, interpolation
/// RCMC, azimuth compression.
pub fn focus_time(scene: &SarScene) -> Result<DMatrix<Complex64>> {
    let s = range_compress(scene.raw.to_time().samples(), &scene.pulse)?;
    let sk = azimuth_dft(&s);
    let c = rcmc_interp(&sk, &scene.geometry);
    let ka = scene.geometry.azimuth_chirp_rates(&scene.ranges)?;
    azimuth_compress_and_image(&c, &ka)
}

/// Fourier-domain RDA: the same pipeline on Fourier coefficients with
/// windowed RCMC. `keep` optionally masks the acquired coefficient bins
/// (per range line); masked bins are treated as unmeasured zeros.
pub fn focus_fourier(
    scene: &SarScene,
    half_width: usize,
    keep: Option<&[bool]>,
) -> Result<DMatrix<Complex64>> {
    let mut coeffs = scene.raw.to_fourier().samples().clone();
    if let Some(mask) = keep {
        if mask.len() != coeffs.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries, data has {} coefficient rows",
                mask.len(),
                coeffs.nrows()
            )));
        }
        for (r, &keep_row) in mask.iter().enumerate() {
            if !keep_row {
                for c in 0..coeffs.ncols() {
                    coeffs[(r, c)] = Complex64::default();
                }
            }
        }
    }
    let nf = coeffs.nrows() as f64;
    let pulse_coeffs: Vec<Complex64> = fft(&scene.pulse).into_iter().map(|v| v / nf).collect();
    let compressed = range_compress_fourier(&coeffs, &pulse_coeffs)?;
    let sk = azimuth_dft(&compressed);
    let ck = rcmc_fourier(&sk, &scene.geometry, half_width)?;
    let c_time = map_columns(&ck, |col| ifft(col));
    let ka = scene.geometry.azimuth_chirp_rates(&scene.ranges)?;
    azimuth_compress_and_image(&c_time, &ka)
}

/// Coefficient-bin mask from signed inclusive index runs, e.g.
/// [(-10, -3), (2, 9)] keeps those sixteen bins of the signed grid.
pub fn band_mask(n: usize, bands: &[(i64, i64)]) -> Result<Vec<bool>> {
    let ni = n as i64;
    let lo_valid = -(ni / 2);
    let hi_valid = (ni - 1) / 2;
    let mut mask = vec![false; n];
    for &(lo, hi) in bands {
        if lo > hi || lo < lo_valid || hi > hi_valid {
            return Err(Error::InvalidInput(format!(
                "band ({lo}, {hi}) does not fit the signed grid [{lo_valid}, {hi_valid}]"
            )));
        }
        for ls in lo..=hi {
            let row = if ls < 0 { ls + ni } else { ls } as usize;
            mask[row] = true;
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = stream_rng(seed, 3);
        DMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn rel_err(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn peak_cell(img: &DMatrix<Complex64>) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_mag = f64::NEG_INFINITY;
        for r in 0..img.nrows() {
            for c in 0..img.ncols() {
                let mag = img[(r, c)].norm();
                if mag > best_mag {
                    best_mag = mag;
                    best = (r, c);
                }
            }
        }
        best
    }

    /// 64 x 16 range-Doppler grid holding one band-limited bump per
    /// Doppler column, placed on the uncorrected trajectory n0 (1 + a k^2)
    /// by a Fourier phase ramp. Gaussian coefficient envelope keeps the
    /// columns effectively band-limited.
    fn hyperbolic_grid(geometry: &SarGeometry, n: usize, n0: f64) -> DMatrix<Complex64> {
        let cols = geometry.positions();
        let scales = column_scales(geometry, cols);
        let nf = n as f64;
        let mut s = DMatrix::<Complex64>::zeros(n, cols);
        for (k, &gamma) in scales.iter().enumerate() {
            let centre = n0 * gamma;
            let coeffs: Vec<Complex64> = (0..n)
                .map(|l| {
                    let ls = signed_index(l, n) as f64;
                    Complex64::from_polar(
                        (-(ls / 4.0) * (ls / 4.0)).exp(),
                        -TWO_PI * ls * centre / nf,
                    )
                })
                .collect();
            for (row, v) in ifft(&coeffs).into_iter().enumerate() {
                s[(row, k)] = v;
            }
        }
        s
    }

    fn trajectory_geometry() -> SarGeometry {
        // a = 1.6^2 / (8 * 0.625 * 16^2) = 2.0e-3 exactly: edge Doppler
        // bins walk bin 28 by 3.6 bins across the 64-point window.
        SarGeometry::new(0.625f64.sqrt(), 1.0, 16, 1.6).unwrap()
    }

    #[test]
    fn geometry_constants_match_hand_values() {
        let g = SarGeometry::new(2.0, 1.0, 4, 4.0).unwrap();
        assert!((g.scale_a() - 16.0 / 512.0).abs() < 1e-15);
        let ka = g.azimuth_chirp_rates(&[8.0]).unwrap();
        assert!((ka[0] - 4.0).abs() < 1e-12);
        assert!(g.azimuth_chirp_rates(&[0.0]).is_err());
        assert!(g.azimuth_chirp_rates(&[f64::NAN]).is_err());
        assert!(SarGeometry::new(0.0, 1.0, 4, 4.0).is_err());
        assert!(SarGeometry::new(2.0, -1.0, 4, 4.0).is_err());
        assert!(SarGeometry::new(2.0, 1.0, 1, 4.0).is_err());
        assert!(SarGeometry::new(2.0, 1.0, 4, f64::INFINITY).is_err());
    }

    #[test]
    fn delta_pulse_compression_returns_the_input() {
        let d = random_matrix(16, 3, 100);
        let mut pulse = vec![Complex64::default(); 16];
        pulse[0] = Complex64::new(1.0, 0.0);
        let s = range_compress(&d, &pulse).unwrap();
        assert!(rel_err(&s, &d) < 1e-12);
    }

    #[test]
    fn chirp_compression_matches_direct_correlation_and_peaks_at_the_delay() {
        let n = 64;
        let delay = 23usize;
        let mut pulse = chirp_pulse(12, 0.8).unwrap();
        pulse.resize(n, Complex64::default());
        let mut col = vec![Complex64::default(); n];
        for (i, &p) in pulse.iter().enumerate() {
            col[(i + delay) % n] = p;
        }
        let d = DMatrix::from_column_slice(n, 1, &col);
        let s = range_compress(&d, &pulse).unwrap();
        // Oracle: the correlation sum written out directly.
        for out in 0..n {
            let mut acc = Complex64::default();
            for i in 0..n {
                acc += col[i] * pulse[(i + n - out) % n].conj();
            }
            assert!((s[(out, 0)] - acc).norm() < 1e-9, "bin {out}");
        }
        let peak = (0..n).max_by(|&a, &b| {
            s[(a, 0)].norm().partial_cmp(&s[(b, 0)].norm()).unwrap()
        });
        assert_eq!(peak, Some(delay));
    }

    #[test]
    fn compression_preserves_energy_through_the_spectrum_weighting() {
        let n = 32;
        let d = random_matrix(n, 1, 200);
        let mut pulse = chirp_pulse(10, 0.6).unwrap();
        pulse.resize(n, Complex64::default());
        let s = range_compress(&d, &pulse).unwrap();
        let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        // Oracle: Parseval with the |H|^2 weighting, as direct sums.
        let col: Vec<Complex64> = d.column(0).iter().cloned().collect();
        let df = fft(&col);
        let hf = fft(&pulse);
        let expected: f64 = df
            .iter()
            .zip(hf.iter())
            .map(|(a, b)| a.norm_sqr() * b.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((energy - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn fourier_range_compression_equals_the_dft_of_the_time_path() {
        let n = 24;
        let d = random_matrix(n, 4, 300);
        let mut pulse = chirp_pulse(9, 0.7).unwrap();
        pulse.resize(n, Complex64::default());
        let nf = n as f64;
        let coeffs = map_columns(&d, |col| fft(col).into_iter().map(|v| v / nf).collect());
        let h: Vec<Complex64> = fft(&pulse).into_iter().map(|v| v / nf).collect();
        let fourier = range_compress_fourier(&coeffs, &h).unwrap();
        let time = range_compress(&d, &pulse).unwrap();
        let time_coeffs = map_columns(&time, |col| {
            fft(col).into_iter().map(|v| v / nf).collect()
        });
        assert!(rel_err(&fourier, &time_coeffs) < 1e-12);
    }

    #[test]
    fn range_compression_rejects_bad_inputs() {
        let d = random_matrix(8, 2, 400);
        let short = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(
            range_compress(&d, &short),
            Err(Error::DimensionMismatch(_))
        ));
        let zero = vec![Complex64::default(); 8];
        assert!(matches!(
            range_compress(&d, &zero),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            range_compress_fourier(&d, &short),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn azimuth_transform_matches_the_naive_dft_and_inverts() {
        let s = random_matrix(8, 8, 500);
        let sk = azimuth_dft(&s);
        let m = s.ncols();
        for n in 0..s.nrows() {
            for k in 0..m {
                let mut acc = Complex64::default();
                for mm in 0..m {
                    acc += s[(n, mm)]
                        * Complex64::from_polar(
                            1.0,
                            -TWO_PI * (k * mm) as f64 / m as f64,
                        );
                }
                assert!((sk[(n, k)] - acc).norm() < 1e-10);
            }
        }
        assert!(rel_err(&azimuth_idft(&sk), &s) < 1e-12);
        let flat = DMatrix::from_element(4, 6, Complex64::new(0.5, -0.25));
        let fk = azimuth_dft(&flat);
        for n in 0..4 {
            assert!((fk[(n, 0)] - Complex64::new(3.0, -1.5)).norm() < 1e-12);
            for k in 1..6 {
                assert!(fk[(n, k)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_doppler_fourier_rcmc_keeps_the_column() {
        let s = random_matrix(16, 4, 600);
        let out = rcmc_fourier(&s, &trajectory_geometry(), 3).unwrap();
        for r in 0..16 {
            assert!((out[(r, 0)] - s[(r, 0)]).norm() < 1e-12);
        }
        assert!(rcmc_fourier(&s, &trajectory_geometry(), 0).is_err());
    }

    #[test]
    fn unit_scale_resampling_is_the_identity() {
        let s = random_matrix(12, 3, 700);
        let out = resample_columns(&s, &[1.0, 1.0, 1.0]);
        assert!(rel_err(&out, &s) < 1e-12);
    }

    #[test]
    fn integer_scaling_reproduces_circular_index_shifts() {
        // a = 16^2/(8 * 2^2 * 2^2) = 2, so the k = -1 column scales by 3
        // and interpolation lands exactly on every third sample.
        let g = SarGeometry::new(2.0, 1.0, 2, 16.0).unwrap();
        assert!((g.scale_a() - 2.0).abs() < 1e-15);
        let s = random_matrix(8, 2, 800);
        let out = rcmc_interp(&s, &g);
        for r in 0..8 {
            assert!((out[(r, 0)] - s[(r, 0)]).norm() < 1e-12);
            assert!((out[(r, 1)] - s[((3 * r) % 8, 1)]).norm() < 1e-10, "row {r}");
        }
    }

    #[test]
    fn interp_rcmc_straightens_the_trajectory() {
        let g = trajectory_geometry();
        let n0 = 28.0;
        let s = hyperbolic_grid(&g, 64, n0);
        let before = &s;
        let after = rcmc_interp(before, &g);
        let scales = column_scales(&g, 16);
        for k in 0..16 {
            let col_peak = |m: &DMatrix<Complex64>| {
                (0..64)
                    .max_by(|&a, &b| {
                        m[(a, k)].norm().partial_cmp(&m[(b, k)].norm()).unwrap()
                    })
                    .unwrap()
            };
            let walked = (n0 * scales[k]).round() as usize;
            assert_eq!(col_peak(before), walked, "column {k} before correction");
            assert_eq!(col_peak(&after), n0 as usize, "column {k} after correction");
        }
    }

    #[test]
    fn full_window_fourier_rcmc_matches_the_interp_oracle() {
        let g = trajectory_geometry();
        let s = hyperbolic_grid(&g, 64, 28.0);
        let nf = 64.0;
        let coeffs = map_columns(&s, |col| fft(col).into_iter().map(|v| v / nf).collect());
        let ck = rcmc_fourier(&coeffs, &g, 32).unwrap();
        let back = map_columns(&ck, |col| ifft(col));
        let oracle = rcmc_interp(&s, &g);
        assert!(rel_err(&back, &oracle) < 1e-9);
    }

    #[test]
    fn windowed_fourier_rcmc_error_shrinks_with_the_window() {
        let g = trajectory_geometry();
        let s = hyperbolic_grid(&g, 64, 28.0);
        let nf = 64.0;
        let coeffs = map_columns(&s, |col| fft(col).into_iter().map(|v| v / nf).collect());
        let oracle = rcmc_interp(&s, &g);
        let err_at = |w: usize| {
            let ck = rcmc_fourier(&coeffs, &g, w).unwrap();
            rel_err(&map_columns(&ck, |col| ifft(col)), &oracle)
        };
        let errs: Vec<f64> = [2, 4, 8, 16].iter().map(|&w| err_at(w)).collect();
        for pair in errs.windows(2) {
            assert!(pair[1] < pair[0], "errors {errs:?} not decreasing");
        }
        assert!(err_at(10) < 1e-2, "W=10 error {} too large", err_at(10));
    }

    #[test]
    fn azimuth_compression_checks_its_inputs_and_maps_zero_to_zero() {
        let zeros = DMatrix::<Complex64>::zeros(4, 4);
        let ka = vec![2.0; 4];
        let img = azimuth_compress_and_image(&zeros, &ka).unwrap();
        assert!(img.iter().all(|v| v.norm() == 0.0));
        let mut bad = ka.clone();
        bad[2] = 0.0;
        assert!(matches!(
            azimuth_compress_and_image(&zeros, &bad),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            azimuth_compress_and_image(&zeros, &ka[..3]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn point_target_focuses_within_one_cell_on_both_paths() {
        let scene = desk_scene();
        let truth = (scene.target_bin as usize, scene.target_pulse as usize);
        let img_time = focus_time(&scene).unwrap();
        let img_fourier = focus_fourier(&scene, 10, None).unwrap();
        for (img, label) in [(&img_time, "time"), (&img_fourier, "fourier")] {
            let peak = peak_cell(img);
            assert!(
                peak.0.abs_diff(truth.0) <= 1 && peak.1.abs_diff(truth.1) <= 1,
                "{label} peak {peak:?} not within one cell of {truth:?}"
            );
        }
        let peak_mag = img_time
            .iter()
            .map(|v| v.norm())
            .fold(f64::NEG_INFINITY, f64::max);
        let diff = (&img_fourier - &img_time)
            .iter()
            .map(|v| v.norm())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            diff <= 0.02 * peak_mag,
            "paths differ by {diff:.3e} against peak {peak_mag:.3e}"
        );
    }

    #[test]
    fn quarter_rate_coefficients_preserve_the_peak_location() {
        let scene = desk_scene();
        let full = focus_fourier(&scene, 10, None).unwrap();
        let mask = band_mask(64, &[(-10, -3), (2, 9)]).unwrap();
        assert_eq!(mask.iter().filter(|&&b| b).count(), 16);
        let quarter = focus_fourier(&scene, 10, Some(&mask)).unwrap();
        assert_eq!(peak_cell(&quarter), peak_cell(&full));
    }

    #[test]
    fn scene_construction_validates_its_physics() {
        let g = SarGeometry::new(0.0125, 64.0, 32, 1.6).unwrap();
        // Target too deep: the trajectory plus pulse overruns the window.
        assert!(matches!(
            point_target_scene(g.clone(), 64, 16, 0.8, 55.0, 16.0, Complex64::new(1.0, 0.0)),
            Err(Error::InvalidInput(_))
        ));
        // A platform fast enough to alias the azimuth phase history.
        let fast = SarGeometry::new(0.125, 64.0, 32, 1.6).unwrap();
        assert!(matches!(
            point_target_scene(fast, 64, 16, 0.8, 40.0, 16.0, Complex64::new(1.0, 0.0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(chirp_pulse(1, 0.5).is_err());
        assert!(chirp_pulse(8, 0.0).is_err());
        assert!(chirp_pulse(8, 1.5).is_err());
        assert!(matches!(
            point_target_scene(g, 64, 16, 0.8, 0.5, 16.0, Complex64::new(1.0, 0.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn raw_data_round_trips_through_the_container() {
        let scene = desk_scene();
        let container = scene
            .raw
            .to_container(&scene.geometry, &scene.pulse)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sar.xamp");
        crate::io::write_xampled(&path, &container).unwrap();
        let loaded = crate::io::read_xampled(&path).unwrap();
        let (raw, pulse) = RawSarData::from_container(&loaded, &scene.geometry).unwrap();
        let original = scene.raw.to_fourier();
        // The container stores f32 pairs, so expect about 1e-6 relative.
        assert!(rel_err(raw.samples(), original.samples()) < 1e-5);
        let worst = pulse
            .iter()
            .zip(scene.pulse.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5);
        let time = raw.to_time();
        assert!(rel_err(time.samples(), scene.raw.samples()) < 1e-5);
    }

    #[test]
    fn raw_data_validates_against_the_geometry() {
        let g = SarGeometry::new(1.0, 1.0, 4, 2.0).unwrap();
        assert!(RawSarData::time(random_matrix(8, 3, 900), &g).is_err());
        assert!(RawSarData::time(DMatrix::zeros(0, 0), &g).is_err());
        let ok = RawSarData::time(random_matrix(8, 4, 900), &g).unwrap();
        assert!(!ok.is_fourier());
        let round = ok.to_fourier().to_time();
        assert!(rel_err(round.samples(), ok.samples()) < 1e-12);
        assert!(band_mask(8, &[(-5, 2)]).is_err());
        assert!(band_mask(8, &[(3, 2)]).is_err());
    }
}
