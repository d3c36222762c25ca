//! Radar configuration, target scenes and signal synthesis.
//!
//! The transmit pulse is described by its Fourier-series coefficients H[k]
//! on the PRI, k = 0..N-1 with N = round(tau * B_h), so that the noiseless
//! received coefficients of pulse p are
//!   c_p[k] = (1/tau) H[k] sum_l alpha_l e^{-j2pi k tau_l/tau} e^{-j nu_l p tau}.
//! Clutter scatterers follow the same law with random (tau_c, nu_c, alpha_c);
//! noise enters directly in the coefficient domain as white complex Gaussian
//! samples of variance sigma_n^2/tau per coefficient.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::fft;
use crate::rng::{complex_gaussian, stream_rng, CLUTTER_STREAM, NOISE_STREAM};
use crate::xampling::{FrequencyIndexSet, XampledData};
use crate::{Error, Result};

/// Pulse-Doppler radar configuration with a band-limited transmit spectrum.
#[derive(Debug, Clone)]
pub struct RadarConfig {
    pri_tau: f64,
    pulses: usize,
    bandwidth: f64,
    carrier: f64,
    total_power: f64,
    spectrum: Vec<Complex64>,
}

impl RadarConfig {
    /// Flat spectrum: |H[k]|^2 = P_T tau / N for every bin.
    pub fn flat(
        pri_tau: f64,
        pulses: usize,
        bandwidth: f64,
        carrier: f64,
        total_power: f64,
    ) -> Result<Self> {
        let n = Self::bins_for(pri_tau, bandwidth)?;
        let mag = (total_power * pri_tau / n as f64).sqrt();
        let spectrum = vec![Complex64::new(mag, 0.0); n];
        Self::with_spectrum(pri_tau, pulses, bandwidth, carrier, total_power, spectrum)
    }

    /// Raised-cosine power profile with roll-off fraction `rolloff` in [0, 1]:
    /// flat over the central (1 - rolloff) of the band, cosine taper to zero
    /// at the band edges, normalized to total power P_T.
    pub fn raised_cosine(
        pri_tau: f64,
        pulses: usize,
        bandwidth: f64,
        carrier: f64,
        total_power: f64,
        rolloff: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(Error::InvalidInput(format!(
                "rolloff must lie in [0, 1], got {rolloff}"
            )));
        }
        let n = Self::bins_for(pri_tau, bandwidth)?;
        let mut weights = vec![1.0f64; n];
        if rolloff > 0.0 {
            let flat_edge = (1.0 - rolloff) / 2.0;
            let taper = rolloff / 2.0;
            for (k, w) in weights.iter_mut().enumerate() {
                let f = (k as f64 + 0.5) / n as f64 - 0.5;
                let d = f.abs() - flat_edge;
                if d > 0.0 {
                    *w = 0.5 * (1.0 + (std::f64::consts::PI * d / taper).cos());
                }
            }
        }
        let sum: f64 = weights.iter().sum();
        let spectrum = weights
            .iter()
            .map(|w| Complex64::new((w * total_power * pri_tau / sum).sqrt(), 0.0))
            .collect();
        Self::with_spectrum(pri_tau, pulses, bandwidth, carrier, total_power, spectrum)
    }

    /// Arbitrary spectrum; the power identity sum |H[k]|^2 / tau = P_T must
    /// hold to 1e-6 relative.
    pub fn with_spectrum(
        pri_tau: f64,
        pulses: usize,
        bandwidth: f64,
        carrier: f64,
        total_power: f64,
        spectrum: Vec<Complex64>,
    ) -> Result<Self> {
        if !(pri_tau.is_finite() && pri_tau > 0.0) {
            return Err(Error::InvalidInput(format!("pri_tau must be > 0, got {pri_tau}")));
        }
        if pulses == 0 {
            return Err(Error::InvalidInput("pulses must be >= 1".into()));
        }
        if !(carrier.is_finite() && carrier >= 0.0) {
            return Err(Error::InvalidInput(format!("carrier must be >= 0, got {carrier}")));
        }
        if !(total_power.is_finite() && total_power > 0.0) {
            return Err(Error::InvalidInput(format!(
                "total_power must be > 0, got {total_power}"
            )));
        }
        let n = Self::bins_for(pri_tau, bandwidth)?;
        if spectrum.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "spectrum has {} bins, expected N = {n}",
                spectrum.len()
            )));
        }
        let power: f64 = spectrum.iter().map(|h| h.norm_sqr()).sum::<f64>() / pri_tau;
        if (power - total_power).abs() > 1e-6 * total_power {
            return Err(Error::InvalidInput(format!(
                "spectrum power {power:.6e} deviates from total_power {total_power:.6e}"
            )));
        }
        Ok(Self {
            pri_tau,
            pulses,
            bandwidth,
            carrier,
            total_power,
            spectrum,
        })
    }

    fn bins_for(pri_tau: f64, bandwidth: f64) -> Result<usize> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be > 0, got {bandwidth}"
            )));
        }
        let n = (pri_tau * bandwidth).round();
        if n < 1.0 || !n.is_finite() {
            return Err(Error::InvalidInput(format!(
                "tau * B_h rounds to {n}, need at least one Nyquist bin"
            )));
        }
        Ok(n as usize)
    }

    pub fn pri_tau(&self) -> f64 {
        self.pri_tau
    }

    pub fn pulses(&self) -> usize {
        self.pulses
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    /// Number of Nyquist-rate Fourier bins, N = round(tau * B_h).
    pub fn nyquist_bins(&self) -> usize {
        self.spectrum.len()
    }

    /// Transmit spectrum H[k], k = 0..N-1.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Delay grid step tau/N in seconds.
    pub fn delay_bin(&self) -> f64 {
        self.pri_tau / self.nyquist_bins() as f64
    }

    /// Doppler grid step 2pi/(P tau) in rad/s.
    pub fn doppler_bin(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.pulses as f64 * self.pri_tau)
    }

    /// Centered Doppler grid nu_u = -pi/tau + 2pi u/(P tau), u = 0..P-1.
    pub fn doppler_grid(&self) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        (0..self.pulses)
            .map(|u| -pi / self.pri_tau + u as f64 * self.doppler_bin())
            .collect()
    }

    /// Replace P, keeping the waveform; used by schedules that thin pulses.
    pub fn with_pulses(&self, pulses: usize) -> Result<Self> {
        let mut cfg = self.clone();
        if pulses == 0 {
            return Err(Error::InvalidInput("pulses must be >= 1".into()));
        }
        cfg.pulses = pulses;
        Ok(cfg)
    }
}

/// Point target. Azimuth (as a sine value through `sin()`) is only consumed
/// by the MIMO module; monostatic pipelines ignore it.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    /// Delay in seconds, within [0, tau).
    pub delay: f64,
    /// Doppler in rad/s, within [-pi/tau, pi/tau).
    pub doppler: f64,
    /// Complex reflectivity.
    pub amplitude: Complex64,
    /// Azimuth angle in radians.
    pub azimuth: f64,
}

impl Target {
    pub fn new(delay: f64, doppler: f64, amplitude: Complex64) -> Self {
        Self {
            delay,
            doppler,
            amplitude,
            azimuth: 0.0,
        }
    }

    pub fn with_azimuth(mut self, azimuth: f64) -> Self {
        self.azimuth = azimuth;
        self
    }
}

/// Homogeneous clutter patch: scatterer delays uniform over the PRI,
/// Dopplers Gaussian around a mean ridge, complex Gaussian reflectivity.
#[derive(Debug, Clone, Copy)]
pub struct ClutterModel {
    /// Number of scatterers C.
    pub count: usize,
    /// Mean scatterer power sigma_c^2 = E[|alpha_c|^2].
    pub mean_power: f64,
    /// Doppler ridge center v_d in rad/s.
    pub doppler_mean: f64,
    /// Doppler ridge spread sigma_d in rad/s.
    pub doppler_std: f64,
}

/// A scene: targets, optional clutter, and the noise level sigma_n^2.
#[derive(Debug, Clone)]
pub struct TargetScene {
    pub targets: Vec<Target>,
    pub clutter: Option<ClutterModel>,
    pub noise_var: f64,
}

impl TargetScene {
    pub fn noiseless(targets: Vec<Target>) -> Self {
        Self {
            targets,
            clutter: None,
            noise_var: 0.0,
        }
    }

    pub fn with_noise(targets: Vec<Target>, noise_var: f64) -> Self {
        Self {
            targets,
            clutter: None,
            noise_var,
        }
    }

    /// Validate ranges and pairwise distinctness against a configuration.
    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        let tau = cfg.pri_tau();
        let nu_max = std::f64::consts::PI / tau;
        for (l, t) in self.targets.iter().enumerate() {
            if !(t.delay.is_finite() && (0.0..tau).contains(&t.delay)) {
                return Err(Error::InvalidInput(format!(
                    "target {l}: delay {} outside [0, {tau})",
                    t.delay
                )));
            }
            if !(t.doppler.is_finite() && (-nu_max..nu_max).contains(&t.doppler)) {
                return Err(Error::InvalidInput(format!(
                    "target {l}: doppler {} outside [-pi/tau, pi/tau)",
                    t.doppler
                )));
            }
            if !t.amplitude.re.is_finite() || !t.amplitude.im.is_finite() {
                return Err(Error::InvalidInput(format!("target {l}: amplitude not finite")));
            }
        }
        for i in 0..self.targets.len() {
            for j in (i + 1)..self.targets.len() {
                if self.targets[i].delay == self.targets[j].delay
                    && self.targets[i].doppler == self.targets[j].doppler
                {
                    return Err(Error::InvalidInput(format!(
                        "targets {i} and {j} share the same (delay, doppler) pair"
                    )));
                }
            }
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise variance must be >= 0, got {}",
                self.noise_var
            )));
        }
        if let Some(c) = &self.clutter {
            if !(c.mean_power.is_finite() && c.mean_power >= 0.0) {
                return Err(Error::InvalidInput("clutter mean_power must be >= 0".into()));
            }
            if !(c.doppler_std.is_finite() && c.doppler_std >= 0.0) {
                return Err(Error::InvalidInput("clutter doppler_std must be >= 0".into()));
            }
            if !c.doppler_mean.is_finite() {
                return Err(Error::InvalidInput("clutter doppler_mean must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Narrowband-model checks. Returns one warning string per violated
/// assumption; an empty vector means the model is comfortably valid.
/// "Much less than" is enforced with a factor-of-ten margin.
pub fn validate_assumptions(cfg: &RadarConfig, scene: &TargetScene) -> Vec<String> {
    let mut warnings = Vec::new();
    let tau = cfg.pri_tau();
    let p = cfg.pulses() as f64;
    for (l, t) in scene.targets.iter().enumerate() {
        if cfg.carrier() > 0.0 {
            // Delay drift over the CPI must stay under a resolution cell:
            // nu_l << 2pi f_c / (P tau B_h).
            let limit = 2.0 * std::f64::consts::PI * cfg.carrier() / (p * tau * cfg.bandwidth());
            if t.doppler.abs() > limit / 10.0 {
                warnings.push(format!(
                    "target {l}: doppler {:.3e} rad/s drifts across range cells over the CPI \
                     (limit {:.3e})",
                    t.doppler, limit
                ));
            }
        }
        // Doppler phase must be near-constant within one PRI: nu_l tau << 2pi.
        if t.doppler.abs() * tau > 2.0 * std::f64::consts::PI / 10.0 {
            warnings.push(format!(
                "target {l}: doppler-PRI product {:.3e} rad is not small; per-frame \
                 constant-phase approximation degrades",
                t.doppler.abs() * tau
            ));
        }
    }
    warnings
}

/// Realized clutter scatterers for one synthesis call.
struct ClutterDraw {
    delays: Vec<f64>,
    dopplers: Vec<f64>,
    amplitudes: Vec<Complex64>,
}

fn draw_clutter(model: &ClutterModel, tau: f64, seed: u64) -> ClutterDraw {
    let mut rng = stream_rng(seed, CLUTTER_STREAM);
    let mut delays = Vec::with_capacity(model.count);
    let mut dopplers = Vec::with_capacity(model.count);
    let mut amplitudes = Vec::with_capacity(model.count);
    for _ in 0..model.count {
        delays.push(rng.random::<f64>() * tau);
        let z: f64 = rng.sample(StandardNormal);
        dopplers.push(model.doppler_mean + model.doppler_std * z);
        amplitudes.push(complex_gaussian(&mut rng, model.mean_power));
    }
    ClutterDraw {
        delays,
        dopplers,
        amplitudes,
    }
}

/// Fourier coefficients on the full index set {0..N-1}.
pub fn synthesize_fourier(cfg: &RadarConfig, scene: &TargetScene, seed: u64) -> Result<XampledData> {
    let kappa = FrequencyIndexSet::full(cfg.nyquist_bins());
    synthesize_fourier_at(cfg, scene, &kappa, seed)
}

/// Fourier coefficients restricted to the rows of `kappa`.
///
/// Noise is drawn for the full N-bin grid in fixed (pulse, bin) order and
/// discarded outside kappa, so restricted and full syntheses see identical
/// draws per retained coefficient.
pub fn synthesize_fourier_at(
    cfg: &RadarConfig,
    scene: &TargetScene,
    kappa: &FrequencyIndexSet,
    seed: u64,
) -> Result<XampledData> {
    let times: Vec<usize> = (0..cfg.pulses()).collect();
    synthesize_fourier_scheduled(cfg, scene, kappa, &times, seed)
}

/// Core synthesis with an explicit pulse schedule: column j of the output
/// is the coefficient vector of physical pulse `times[j]`. Noise covers all
/// cfg.pulses() physical slots (same draw order as the uniform case) and is
/// discarded at unscheduled ones, so any schedule sees the draws the full
/// train would have seen at those pulses.
pub(crate) fn synthesize_fourier_scheduled(
    cfg: &RadarConfig,
    scene: &TargetScene,
    kappa: &FrequencyIndexSet,
    times: &[usize],
    seed: u64,
) -> Result<XampledData> {
    scene.validate(cfg)?;
    kappa.validate_for(cfg.nyquist_bins())?;
    let total = cfg.pulses();
    if times.iter().any(|&m| m >= total) {
        return Err(Error::InvalidInput(
            "schedule entry exceeds the pulse count".into(),
        ));
    }
    let tau = cfg.pri_tau();
    let n = cfg.nyquist_bins();
    let k_len = kappa.indices.len();
    let two_pi = 2.0 * std::f64::consts::PI;

    let clutter = scene
        .clutter
        .as_ref()
        .map(|model| draw_clutter(model, tau, seed));

    let mut coeffs = DMatrix::<Complex64>::zeros(k_len, times.len());
    // Deterministic emitters: targets first, then the clutter realization.
    let emit = |delays: &[f64], dopplers: &[f64], amps: &[Complex64], coeffs: &mut DMatrix<Complex64>| {
        for ((&delay, &doppler), &amp) in delays.iter().zip(dopplers).zip(amps) {
            for (row, &k) in kappa.indices.iter().enumerate() {
                let h = cfg.spectrum()[k];
                let delay_phase = Complex64::from_polar(1.0, -two_pi * k as f64 * delay / tau);
                let base = h * amp * delay_phase / tau;
                for (col, &m) in times.iter().enumerate() {
                    let dop = Complex64::from_polar(1.0, -doppler * m as f64 * tau);
                    coeffs[(row, col)] += base * dop;
                }
            }
        }
    };

    let t_delays: Vec<f64> = scene.targets.iter().map(|t| t.delay).collect();
    let t_dopplers: Vec<f64> = scene.targets.iter().map(|t| t.doppler).collect();
    let t_amps: Vec<Complex64> = scene.targets.iter().map(|t| t.amplitude).collect();
    emit(&t_delays, &t_dopplers, &t_amps, &mut coeffs);
    if let Some(c) = &clutter {
        emit(&c.delays, &c.dopplers, &c.amplitudes, &mut coeffs);
    }

    if scene.noise_var > 0.0 {
        let var = scene.noise_var / tau;
        let mut rng = stream_rng(seed, NOISE_STREAM);
        let pos = kappa.position_map(n);
        let mut time_pos = vec![None; total];
        for (col, &m) in times.iter().enumerate() {
            time_pos[m] = Some(col);
        }
        for pulse in 0..total {
            for k in 0..n {
                let w = complex_gaussian(&mut rng, var);
                if let (Some(col), Some(row)) = (time_pos[pulse], pos[k]) {
                    coeffs[(row, col)] += w;
                }
            }
        }
    }

    let h_kappa = kappa.indices.iter().map(|&k| cfg.spectrum()[k]).collect();
    Ok(XampledData {
        coeffs,
        kappa: kappa.clone(),
        n_bins: n,
        pri_tau: tau,
        h_kappa,
    })
}

/// Baseband time-domain frames at the given sample rate.
#[derive(Debug, Clone)]
pub struct TimeFrames {
    /// N_s x P complex samples; column p is the aligned frame of pulse p.
    pub samples: DMatrix<Complex64>,
    pub sample_rate: f64,
    pub pri_tau: f64,
    /// Nyquist bin count N of the generating configuration.
    pub n_bins: usize,
}

impl TimeFrames {
    /// Energy of frame p as the integral of |r(t)|^2 over the PRI.
    pub fn frame_energy(&self, pulse: usize) -> f64 {
        let ns = self.samples.nrows() as f64;
        self.samples
            .column(pulse)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * self.pri_tau
            / ns
    }
}

/// Time samples of the frames at rate `sample_rate` >= B_h. The frame signal
/// is the Fourier synthesis of the same coefficients `synthesize_fourier`
/// produces (same seed, same draws), so delays wrap circularly on the PRI.
pub fn synthesize_time(
    cfg: &RadarConfig,
    scene: &TargetScene,
    sample_rate: f64,
    seed: u64,
) -> Result<TimeFrames> {
    let n = cfg.nyquist_bins();
    let ns = (cfg.pri_tau() * sample_rate).round() as usize;
    if ns < n {
        return Err(Error::InvalidInput(format!(
            "sample rate {sample_rate} gives {ns} samples per PRI, below the {n} Nyquist bins"
        )));
    }
    let data = synthesize_fourier(cfg, scene, seed)?;
    let mut samples = DMatrix::<Complex64>::zeros(ns, cfg.pulses());
    for pulse in 0..cfg.pulses() {
        let mut buf = vec![Complex64::default(); ns];
        for k in 0..n {
            buf[k] = data.coeffs[(k, pulse)];
        }
        fft::ifft_in_place(&mut buf);
        for (row, v) in buf.into_iter().enumerate() {
            samples[(row, pulse)] = v;
        }
    }
    Ok(TimeFrames {
        samples,
        sample_rate,
        pri_tau: cfg.pri_tau(),
        n_bins: n,
    })
}
