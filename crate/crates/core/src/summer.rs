//! Thinned collocated MIMO radar: sub-Nyquist sampling in time and space.
//!
//! A virtual uniform array with T transmit and R receive elements is thinned
//! to M transmitters and Q receivers placed inside the shared aperture
//! Z = TR/2 (positions in wavelengths). Transmitters stay orthogonal by
//! frequency division; the channel that processes transmitter m at receiver
//! q keeps K Fourier coefficients per pulse,
//!
//!   y_{m,q}^p[k] = sum_l alpha_l e^{+j2pi beta_mq v_l}
//!                  e^{-j2pi kappa_k tau_l/tau} e^{-j2pi f_m tau_l}
//!                  e^{+j nu_l p tau},
//!
//! where beta_mq = xi_m + zeta_q sums the element positions, v_l = sin of
//! the azimuth angle, f_m the baseband carrier, and nu_l the Doppler in
//! rad/s. Stacking channels spreads the samples over a TN x TR x P
//! delay-azimuth-Doppler grid with steps tau/(TN), 2/(TR) and 2pi/(P tau):
//! the full virtual-array resolutions at a fraction of its elements and
//! rate. Recovery Doppler-focuses the channels and runs a greedy pursuit
//! over the three-way grid.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pursuit::lstsq;
use crate::rng::{complex_gaussian, stream_rng, NOISE_STREAM, SCHEME_STREAM};
use crate::scene::{RadarConfig, Target, TargetScene};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Shortlist width for the pursuit rescue pass: how many of the strongest
/// raw-data cells get a chance to re-seed the greedy selection.
const RESCUE_BEAM: usize = 64;

/// Transmit/receive element layout inside a virtual ULA aperture.
///
/// Positions are in wavelengths, within [0, Z] for Z = TR/2. The pair
/// (virtual_t, virtual_r) fixes the recovery grid sizes TN and TR, so a
/// thinned array keeps the full array's resolution.
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    tx_positions: Vec<f64>,
    rx_positions: Vec<f64>,
    virtual_t: usize,
    virtual_r: usize,
}

impl ArrayGeometry {
    pub fn new(
        tx_positions: Vec<f64>,
        rx_positions: Vec<f64>,
        virtual_t: usize,
        virtual_r: usize,
    ) -> Result<Self> {
        if virtual_t == 0 || virtual_r == 0 {
            return Err(Error::InvalidInput("virtual array sizes must be >= 1".into()));
        }
        if tx_positions.is_empty() || rx_positions.is_empty() {
            return Err(Error::EmptyInput("array element positions".into()));
        }
        if tx_positions.len() > virtual_t || rx_positions.len() > virtual_r {
            return Err(Error::InvalidInput(format!(
                "thinned counts ({}, {}) exceed the virtual array ({virtual_t}, {virtual_r})",
                tx_positions.len(),
                rx_positions.len()
            )));
        }
        let aperture = virtual_t as f64 * virtual_r as f64 / 2.0;
        for &pos in tx_positions.iter().chain(rx_positions.iter()) {
            if !(pos.is_finite() && (0.0..=aperture).contains(&pos)) {
                return Err(Error::InvalidInput(format!(
                    "element position {pos} outside the aperture [0, {aperture}]"
                )));
            }
        }
        Ok(Self {
            tx_positions,
            rx_positions,
            virtual_t,
            virtual_r,
        })
    }

    /// Full uniform layout: T transmitters spaced R/2, R receivers spaced
    /// 1/2, so the TR sums xi_m + zeta_q tile the virtual grid exactly.
    pub fn ula(t: usize, r: usize) -> Result<Self> {
        let tx = (0..t).map(|m| m as f64 * r as f64 / 2.0).collect();
        let rx = (0..r).map(|q| q as f64 / 2.0).collect();
        Self::new(tx, rx, t, r)
    }

    /// Thinned layout: m transmitters and q receivers drawn uniformly over
    /// the aperture of the (t, r) virtual array.
    pub fn random(m: usize, q: usize, t: usize, r: usize, seed: u64) -> Result<Self> {
        if m == 0 || q == 0 {
            return Err(Error::InvalidInput("element counts must be >= 1".into()));
        }
        let aperture = t as f64 * r as f64 / 2.0;
        let mut rng = stream_rng(seed, SCHEME_STREAM);
        let tx = (0..m).map(|_| rng.random::<f64>() * aperture).collect();
        let rx = (0..q).map(|_| rng.random::<f64>() * aperture).collect();
        Self::new(tx, rx, t, r)
    }

    /// Named hardware modes: 1 = full 8x10 uniform, 2 = full 8x10 random,
    /// 3 = thinned 4x5 random on the 8x10 aperture, 4 = 8x10 random on a
    /// 20x20 aperture. The seed fixes the random placements.
    pub fn preset_mode(mode: u8, seed: u64) -> Result<Self> {
        match mode {
            1 => Self::ula(8, 10),
            2 => Self::random(8, 10, 8, 10, seed),
            3 => Self::random(4, 5, 8, 10, seed),
            4 => Self::random(8, 10, 20, 20, seed),
            _ => Err(Error::InvalidInput(format!("unknown array mode {mode}"))),
        }
    }

    pub fn tx_count(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn rx_count(&self) -> usize {
        self.rx_positions.len()
    }

    pub fn virtual_t(&self) -> usize {
        self.virtual_t
    }

    pub fn virtual_r(&self) -> usize {
        self.virtual_r
    }

    pub fn tx_positions(&self) -> &[f64] {
        &self.tx_positions
    }

    pub fn rx_positions(&self) -> &[f64] {
        &self.rx_positions
    }

    /// Normalized aperture Z = TR/2 in wavelengths.
    pub fn aperture(&self) -> f64 {
        self.virtual_t as f64 * self.virtual_r as f64 / 2.0
    }

    /// Summed element position beta_mq = xi_m + zeta_q driving the azimuth
    /// phase e^{j2pi beta_mq v}.
    pub fn beta(&self, m: usize, q: usize) -> f64 {
        self.tx_positions[m] + self.rx_positions[q]
    }
}

/// MIMO acquisition: waveform parameters, array layout, per-transmitter
/// baseband carriers and the signed Fourier indices kept per channel.
#[derive(Debug, Clone)]
pub struct MimoConfig {
    cfg: RadarConfig,
    geometry: ArrayGeometry,
    carriers_hz: Vec<f64>,
    kappa: Vec<i64>,
}

impl MimoConfig {
    /// kappa holds signed per-channel Fourier indices, strictly increasing
    /// within [-N/2, (N-1)/2]; carriers must keep the per-pulse bands B_h
    /// apart so the channels can be separated.
    pub fn new(
        cfg: RadarConfig,
        geometry: ArrayGeometry,
        carriers_hz: Vec<f64>,
        kappa: Vec<i64>,
    ) -> Result<Self> {
        if carriers_hz.len() != geometry.tx_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} carriers for {} transmitters",
                carriers_hz.len(),
                geometry.tx_count()
            )));
        }
        let bh = cfg.bandwidth();
        for (i, &f) in carriers_hz.iter().enumerate() {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::InvalidInput(format!("carrier {i} must be finite and >= 0")));
            }
            for &g in &carriers_hz[i + 1..] {
                if (f - g).abs() < bh * (1.0 - 1e-9) {
                    return Err(Error::InvalidInput(format!(
                        "carriers {f} and {g} Hz are closer than the pulse bandwidth {bh}"
                    )));
                }
            }
        }
        let n = cfg.nyquist_bins() as i64;
        if kappa.is_empty() {
            return Err(Error::EmptyInput("kappa index set".into()));
        }
        if kappa.len() > n as usize {
            return Err(Error::InvalidInput(format!(
                "{} coefficients per channel exceed the {n} Nyquist bins",
                kappa.len()
            )));
        }
        for w in kappa.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(format!(
                    "kappa must be strictly increasing, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if kappa[0] < -(n / 2) || kappa[kappa.len() - 1] > (n - 1) / 2 {
            return Err(Error::InvalidInput(format!(
                "kappa must lie in [{}, {}]",
                -(n / 2),
                (n - 1) / 2
            )));
        }
        Ok(Self {
            cfg,
            geometry,
            carriers_hz,
            kappa,
        })
    }

    /// Convenience layout: K centered Fourier indices per channel and
    /// carriers on evenly spread multiples of B_h (slot round(mT/M) for
    /// transmitter m), which keeps the M bands disjoint inside the total
    /// T B_h bandwidth.
    pub fn lowpass(cfg: RadarConfig, geometry: ArrayGeometry, k: usize) -> Result<Self> {
        let m_count = geometry.tx_count();
        let t = geometry.virtual_t();
        let bh = cfg.bandwidth();
        let carriers = (0..m_count)
            .map(|m| (m as f64 * t as f64 / m_count as f64).round() * bh)
            .collect();
        let lo = -(k as i64) / 2;
        let kappa = (lo..lo + k as i64).collect();
        Self::new(cfg, geometry, carriers, kappa)
    }

    pub fn cfg(&self) -> &RadarConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn carriers_hz(&self) -> &[f64] {
        &self.carriers_hz
    }

    pub fn kappa(&self) -> &[i64] {
        &self.kappa
    }

    /// Coefficients kept per channel (K).
    pub fn coeffs(&self) -> usize {
        self.kappa.len()
    }

    /// Delay grid length TN; step tau/(TN) = 1/(T B_h).
    pub fn delay_cells(&self) -> usize {
        self.geometry.virtual_t() * self.cfg.nyquist_bins()
    }

    /// Azimuth grid length TR; step 2/(TR) in sine units.
    pub fn azimuth_cells(&self) -> usize {
        self.geometry.virtual_t() * self.geometry.virtual_r()
    }

    /// Delay of grid cell s, in seconds.
    pub fn delay_of(&self, s: usize) -> f64 {
        self.cfg.pri_tau() * s as f64 / self.delay_cells() as f64
    }

    /// Sine azimuth of grid cell r: -1 + 2r/(TR).
    pub fn sine_azimuth_of(&self, r: usize) -> f64 {
        -1.0 + 2.0 * r as f64 / self.azimuth_cells() as f64
    }
}

/// Per-channel Fourier coefficients: block m is the KQ x P matrix whose
/// column p stacks y_{m,q}^p[kappa_k] with k running fastest.
#[derive(Debug, Clone)]
pub struct ChannelFourier {
    blocks: Vec<DMatrix<Complex64>>,
    coeffs: usize,
    receivers: usize,
}

impl ChannelFourier {
    pub fn from_blocks(
        blocks: Vec<DMatrix<Complex64>>,
        coeffs: usize,
        receivers: usize,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyInput("channel blocks".into()));
        }
        let pulses = blocks[0].ncols();
        for (m, b) in blocks.iter().enumerate() {
            if b.nrows() != coeffs * receivers || b.ncols() != pulses {
                return Err(Error::DimensionMismatch(format!(
                    "block {m} is {}x{}, expected {}x{pulses}",
                    b.nrows(),
                    b.ncols(),
                    coeffs * receivers
                )));
            }
        }
        Ok(Self {
            blocks,
            coeffs,
            receivers,
        })
    }

    pub fn channels(&self) -> usize {
        self.blocks.len()
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn coeffs(&self) -> usize {
        self.coeffs
    }

    pub fn pulses(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn block(&self, m: usize) -> &DMatrix<Complex64> {
        &self.blocks[m]
    }

    /// y_{m,q}^p[kappa_k].
    pub fn coefficient(&self, m: usize, q: usize, p: usize, k: usize) -> Complex64 {
        self.blocks[m][(q * self.coeffs + k, p)]
    }

    /// Root total energy over every channel.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

fn validate_mimo_scene(cfgm: &MimoConfig, scene: &TargetScene) -> Result<()> {
    let tau = cfgm.cfg().pri_tau();
    let nu_max = std::f64::consts::PI / tau;
    let half_pi = std::f64::consts::FRAC_PI_2;
    if scene.clutter.is_some() {
        return Err(Error::InvalidInput(
            "clutter is not modeled in the MIMO pipeline".into(),
        ));
    }
    if !(scene.noise_var.is_finite() && scene.noise_var >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be >= 0, got {}",
            scene.noise_var
        )));
    }
    for (l, t) in scene.targets.iter().enumerate() {
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
        // sin(azimuth) must land in [-1, 1), i.e. the angle in [-pi/2, pi/2).
        if !(t.azimuth.is_finite() && (-half_pi..half_pi).contains(&t.azimuth)) {
            return Err(Error::InvalidInput(format!(
                "target {l}: azimuth {} outside [-pi/2, pi/2)",
                t.azimuth
            )));
        }
        if !t.amplitude.re.is_finite() || !t.amplitude.im.is_finite() {
            return Err(Error::InvalidInput(format!("target {l}: amplitude not finite")));
        }
    }
    for i in 0..scene.targets.len() {
        for j in (i + 1)..scene.targets.len() {
            let (a, b) = (&scene.targets[i], &scene.targets[j]);
            if a.delay == b.delay && a.doppler == b.doppler && a.azimuth == b.azimuth {
                return Err(Error::InvalidInput(format!(
                    "targets {i} and {j} share the same (delay, doppler, azimuth)"
                )));
            }
        }
    }
    Ok(())
}

/// Synthesize the aligned, normalized channel coefficients of a scene.
///
/// Channels are normalized (the pulse spectrum H_m is divided out), so a
/// unit target at delay 0, broadside, zero Doppler gives 1 in every cell.
/// Noise is white complex Gaussian of variance sigma_n^2/tau per
/// coefficient, drawn in fixed (m, q, p, k) order from the noise stream.
pub fn synthesize_mimo(
    cfgm: &MimoConfig,
    scene: &TargetScene,
    seed: u64,
) -> Result<ChannelFourier> {
    validate_mimo_scene(cfgm, scene)?;
    let tau = cfgm.cfg().pri_tau();
    let p_count = cfgm.cfg().pulses();
    let k_count = cfgm.coeffs();
    let q_count = cfgm.geometry().rx_count();
    let m_count = cfgm.geometry().tx_count();

    let mut blocks = vec![DMatrix::<Complex64>::zeros(k_count * q_count, p_count); m_count];
    for (m, block) in blocks.iter_mut().enumerate() {
        let f_m = cfgm.carriers_hz()[m];
        for t in &scene.targets {
            let v = t.azimuth.sin();
            let carrier = Complex64::from_polar(1.0, -TWO_PI * f_m * t.delay);
            let mut col = DVector::<Complex64>::zeros(k_count * q_count);
            for q in 0..q_count {
                let az = Complex64::from_polar(1.0, TWO_PI * cfgm.geometry().beta(m, q) * v);
                for (k, &kap) in cfgm.kappa().iter().enumerate() {
                    let delay =
                        Complex64::from_polar(1.0, -TWO_PI * kap as f64 * t.delay / tau);
                    col[q * k_count + k] = az * delay * carrier;
                }
            }
            let row = RowDVector::<Complex64>::from_fn(p_count, |_, p| {
                Complex64::from_polar(1.0, t.doppler * p as f64 * tau)
            });
            *block += &col * &row * t.amplitude;
        }
    }
    if scene.noise_var > 0.0 {
        let mut rng = stream_rng(seed, NOISE_STREAM);
        let var = scene.noise_var / tau;
        for block in blocks.iter_mut() {
            for q in 0..q_count {
                for p in 0..p_count {
                    for k in 0..k_count {
                        block[(q * k_count + k, p)] += complex_gaussian(&mut rng, var);
                    }
                }
            }
        }
    }
    ChannelFourier::from_blocks(blocks, k_count, q_count)
}

/// Per-transmitter dictionaries sampling the recovery grid.
///
/// The delay dictionary A^m is K x TN with
/// A^m[k, n] = e^{-j2pi kappa_k n/(TN)} e^{-j2pi f_m n/(T B_h)}; the azimuth
/// dictionary B^m is Q x TR with B^m[q, r] = e^{+j2pi beta_mq (-1 + 2r/TR)},
/// stored with the data-side phase sign so that a one-hot coefficient matrix
/// reproduces the synthesized channels without conjugation.
pub fn build_dictionaries(
    cfgm: &MimoConfig,
) -> (Vec<DMatrix<Complex64>>, Vec<DMatrix<Complex64>>) {
    let tn = cfgm.delay_cells();
    let tr = cfgm.azimuth_cells();
    let k_count = cfgm.coeffs();
    let q_count = cfgm.geometry().rx_count();
    let t = cfgm.geometry().virtual_t() as f64;
    let bh = cfgm.cfg().bandwidth();
    let mut a_mats = Vec::with_capacity(cfgm.geometry().tx_count());
    let mut b_mats = Vec::with_capacity(cfgm.geometry().tx_count());
    for m in 0..cfgm.geometry().tx_count() {
        let f_m = cfgm.carriers_hz()[m];
        a_mats.push(DMatrix::from_fn(k_count, tn, |k, n| {
            let grid = cfgm.kappa()[k] as f64 * n as f64 / tn as f64;
            let carrier = f_m * n as f64 / (t * bh);
            Complex64::from_polar(1.0, -TWO_PI * (grid + carrier))
        }));
        b_mats.push(DMatrix::from_fn(q_count, tr, |q, r| {
            let v = -1.0 + 2.0 * r as f64 / tr as f64;
            Complex64::from_polar(1.0, TWO_PI * cfgm.geometry().beta(m, q) * v)
        }));
    }
    (a_mats, b_mats)
}

/// Doppler steering F[u, p] = e^{j nu_u p tau} on the centered grid
/// nu_u = -pi/tau + 2pi u/(P tau), which is (-1)^p e^{j2pi up/P}.
fn doppler_steering(p_count: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(p_count, p_count, |u, p| {
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::from_polar(sign, TWO_PI * u as f64 * p as f64 / p_count as f64)
    })
}

/// Recovered delay-azimuth-Doppler support and amplitudes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MimoRecovery {
    /// (delay index s, azimuth index r, Doppler index u) in selection order.
    pub support: Vec<(usize, usize, usize)>,
    #[serde(with = "crate::io::complex_pairs")]
    pub amplitudes: Vec<Complex64>,
    /// Delay estimates tau s/(TN), seconds.
    pub delays: Vec<f64>,
    /// Sine-azimuth estimates -1 + 2r/(TR).
    pub azimuths: Vec<f64>,
    /// Doppler estimates -pi/tau + 2pi u/(P tau), rad/s.
    pub dopplers: Vec<f64>,
    /// Residual trace: input norm, one entry per greedy pick, then one per
    /// accepted replacement during the polish sweeps and one more if the
    /// rescue pass swapped in a better support.
    pub residual_norms: Vec<f64>,
}

impl MimoRecovery {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

struct Omp3dWork<'a> {
    a_mats: &'a [DMatrix<Complex64>],
    b_conj: &'a [DMatrix<Complex64>],
    f_dop: &'a DMatrix<Complex64>,
    tn: usize,
    tr: usize,
    k_count: usize,
    q_count: usize,
}

impl Omp3dWork<'_> {
    /// Best grid cell by focused matched-filter magnitude: Doppler-focus
    /// every channel of the residual, project onto the delay and azimuth
    /// dictionaries, and take the largest |Psi| (smallest (s, r, u) wins
    /// ties). Returns the squared magnitude alongside.
    fn best_cell(&self, residual: &[DMatrix<Complex64>]) -> ((usize, usize, usize), f64) {
        let p_count = self.f_dop.nrows();
        let focused: Vec<DMatrix<Complex64>> = residual
            .iter()
            .map(|r| r * self.f_dop.adjoint())
            .collect();
        let mut best = (0usize, 0usize, 0usize);
        let mut best_mag2 = f64::NEG_INFINITY;
        for u in 0..p_count {
            let mut psi = DMatrix::<Complex64>::zeros(self.tn, self.tr);
            for (m, phi) in focused.iter().enumerate() {
                let col = phi.column(u);
                let rm = DMatrix::from_column_slice(self.k_count, self.q_count, col.as_slice());
                psi += self.a_mats[m].adjoint() * rm * &self.b_conj[m];
            }
            for r in 0..self.tr {
                for s in 0..self.tn {
                    let mag2 = psi[(s, r)].norm_sqr();
                    if mag2 > best_mag2 || (mag2 == best_mag2 && (s, r, u) < best) {
                        best_mag2 = mag2;
                        best = (s, r, u);
                    }
                }
            }
        }
        (best, best_mag2)
    }

    /// Top `count` grid cells by focused matched-filter magnitude on
    /// `residual`, strongest first, ties toward the smaller (s, r, u).
    fn top_cells(
        &self,
        residual: &[DMatrix<Complex64>],
        count: usize,
    ) -> Vec<(usize, usize, usize)> {
        let p_count = self.f_dop.nrows();
        let focused: Vec<DMatrix<Complex64>> = residual
            .iter()
            .map(|r| r * self.f_dop.adjoint())
            .collect();
        let mut scored = Vec::with_capacity(self.tn * self.tr * p_count);
        for u in 0..p_count {
            let mut psi = DMatrix::<Complex64>::zeros(self.tn, self.tr);
            for (m, phi) in focused.iter().enumerate() {
                let col = phi.column(u);
                let rm = DMatrix::from_column_slice(self.k_count, self.q_count, col.as_slice());
                psi += self.a_mats[m].adjoint() * rm * &self.b_conj[m];
            }
            for r in 0..self.tr {
                for s in 0..self.tn {
                    scored.push((psi[(s, r)].norm_sqr(), (s, r, u)));
                }
            }
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        scored.truncate(count);
        scored.into_iter().map(|(_, cell)| cell).collect()
    }

    /// Stacked atom for cell (s, r, u): entry (m, k, q, p) holds
    /// A^m[k, s] B^m[q, r] F[u, p], laid out to match vec order
    /// m-block, then column p, then row qK + k.
    fn atom(&self, cell: (usize, usize, usize)) -> DVector<Complex64> {
        let (s, r, u) = cell;
        let p_count = self.f_dop.nrows();
        let kq = self.k_count * self.q_count;
        let mut e = DVector::zeros(self.a_mats.len() * kq * p_count);
        for m in 0..self.a_mats.len() {
            for p in 0..p_count {
                let f = self.f_dop[(u, p)];
                for q in 0..self.q_count {
                    // b_conj holds conj(B), so conjugate back for the atom.
                    let bf = self.b_conj[m][(q, r)].conj() * f;
                    for k in 0..self.k_count {
                        e[m * kq * p_count + p * kq + q * self.k_count + k] =
                            self.a_mats[m][(k, s)] * bf;
                    }
                }
            }
        }
        e
    }
}

fn stack_blocks(y: &ChannelFourier) -> DMatrix<Complex64> {
    let kq = y.coeffs() * y.receivers();
    let total = y.channels() * kq * y.pulses();
    let mut z = DMatrix::zeros(total, 1);
    for m in 0..y.channels() {
        for (i, &v) in y.block(m).as_slice().iter().enumerate() {
            z[(m * kq * y.pulses() + i, 0)] = v;
        }
    }
    z
}

/// Residual blocks for a given support and joint amplitude fit.
fn rebuild_residual(
    y: &ChannelFourier,
    work: &Omp3dWork<'_>,
    support: &[(usize, usize, usize)],
    alpha: &DMatrix<Complex64>,
) -> Vec<DMatrix<Complex64>> {
    let p_count = y.pulses();
    let mut blocks: Vec<DMatrix<Complex64>> =
        (0..y.channels()).map(|m| y.block(m).clone()).collect();
    for (l, &(s, r, u)) in support.iter().enumerate() {
        let al = alpha[(l, 0)];
        for (m, block) in blocks.iter_mut().enumerate() {
            for p in 0..p_count {
                let f = work.f_dop[(u, p)] * al;
                for q in 0..work.q_count {
                    let bf = work.b_conj[m][(q, r)].conj() * f;
                    for k in 0..work.k_count {
                        block[(q * work.k_count + k, p)] -= work.a_mats[m][(k, s)] * bf;
                    }
                }
            }
        }
    }
    blocks
}

fn blocks_norm(blocks: &[DMatrix<Complex64>]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// A support set together with its joint least-squares fit to the data.
#[derive(Clone)]
struct Fit {
    support: Vec<(usize, usize, usize)>,
    alpha: DMatrix<Complex64>,
    residual: Vec<DMatrix<Complex64>>,
    norm: f64,
}

fn refit(
    y: &ChannelFourier,
    work: &Omp3dWork<'_>,
    z: &DMatrix<Complex64>,
    support: Vec<(usize, usize, usize)>,
) -> Result<Fit> {
    let atoms: Vec<DVector<Complex64>> = support.iter().map(|&c| work.atom(c)).collect();
    let e_mat = DMatrix::from_columns(&atoms);
    let alpha = lstsq(&e_mat, z)?;
    let residual = rebuild_residual(y, work, &support, &alpha);
    let norm = blocks_norm(&residual);
    Ok(Fit {
        support,
        alpha,
        residual,
        norm,
    })
}

/// Cyclic replacement: drop one atom at a time, re-pick against the joint
/// residual of the rest, keep strict improvements only. Accepted norms are
/// appended to `trace`. No-op when there is nothing to improve.
fn polish(
    fit: &mut Fit,
    y: &ChannelFourier,
    work: &Omp3dWork<'_>,
    z: &DMatrix<Complex64>,
    initial_norm: f64,
    trace: &mut Vec<f64>,
) -> Result<()> {
    if fit.support.len() < 2 || fit.norm <= 1e-12 * initial_norm {
        return Ok(());
    }
    for _sweep in 0..10 {
        let mut changed = false;
        for idx in 0..fit.support.len() {
            let mut reduced = fit.support.clone();
            reduced.remove(idx);
            let red = refit(y, work, z, reduced)?;
            let (cand, mag2) = work.best_cell(&red.residual);
            if mag2 <= 0.0 || red.support.contains(&cand) || cand == fit.support[idx] {
                continue;
            }
            let mut trial = red.support;
            trial.push(cand);
            let trial_fit = refit(y, work, z, trial)?;
            if trial_fit.norm < fit.norm * (1.0 - 1e-9) {
                *fit = trial_fit;
                trace.push(fit.norm);
                changed = true;
            }
        }
        if !changed || fit.norm <= 1e-12 * initial_norm {
            break;
        }
    }
    Ok(())
}

/// Greedy 3D pursuit with Doppler focusing over the stacked channels.
///
/// Each iteration focuses the residual on the P-point Doppler grid,
/// projects onto the delay and azimuth dictionaries of every transmitter,
/// picks the strongest (delay, azimuth, Doppler) cell and refits all
/// amplitudes jointly by least squares over the stacked atoms. After
/// `l_max` picks, a polish pass cyclically re-selects each atom against the
/// residual of the others, and if the residual still stays materially above
/// zero a rescue pass re-seeds the pursuit from each of the strongest raw
/// data cells and keeps the best completed support. Neither pass ever
/// changes an already-exact noiseless recovery; together they rescue most
/// jointly wrong picks near the minimal sampling regime.
pub fn omp3d(y: &ChannelFourier, cfgm: &MimoConfig, l_max: usize) -> Result<MimoRecovery> {
    let m_count = cfgm.geometry().tx_count();
    if y.channels() != m_count
        || y.coeffs() != cfgm.coeffs()
        || y.receivers() != cfgm.geometry().rx_count()
        || y.pulses() != cfgm.cfg().pulses()
    {
        return Err(Error::DimensionMismatch(format!(
            "data is {} channels of {}x{} with {} coefficients, config wants {m_count} of {}x{} with {}",
            y.channels(),
            y.coeffs() * y.receivers(),
            y.pulses(),
            y.coeffs(),
            cfgm.coeffs() * cfgm.geometry().rx_count(),
            cfgm.cfg().pulses(),
            cfgm.coeffs(),
        )));
    }
    let (a_mats, b_mats) = build_dictionaries(cfgm);
    let b_conj: Vec<DMatrix<Complex64>> = b_mats.iter().map(|b| b.conjugate()).collect();
    let f_dop = doppler_steering(y.pulses());
    let work = Omp3dWork {
        a_mats: &a_mats,
        b_conj: &b_conj,
        f_dop: &f_dop,
        tn: cfgm.delay_cells(),
        tr: cfgm.azimuth_cells(),
        k_count: cfgm.coeffs(),
        q_count: cfgm.geometry().rx_count(),
    };
    let z = stack_blocks(y);
    let initial_norm = y.norm();
    let mut residual_norms = vec![initial_norm];
    let mut fit = Fit {
        support: Vec::new(),
        alpha: DMatrix::zeros(0, 1),
        residual: (0..m_count).map(|m| y.block(m).clone()).collect(),
        norm: initial_norm,
    };

    for _ in 0..l_max {
        let (best, best_mag2) = work.best_cell(&fit.residual);
        if best_mag2.sqrt() <= 1e-12 * initial_norm {
            break;
        }
        if fit.support.contains(&best) {
            return Err(Error::ResidualStalled(format!(
                "re-selected cell ({}, {}, {})",
                best.0, best.1, best.2
            )));
        }
        let mut next = fit.support.clone();
        next.push(best);
        fit = refit(y, &work, &z, next)?;
        residual_norms.push(fit.norm);
        if fit.norm <= 1e-12 * initial_norm {
            break;
        }
    }

    polish(&mut fit, y, &work, &z, initial_norm, &mut residual_norms)?;

    // Rescue: a residual still far from zero means the greedy start was
    // jointly wrong (mutual interference pushes the argmax off every true
    // cell and single swaps stay in that local minimum). Beam search:
    // re-seed from each of the strongest cells of the raw data, complete
    // greedily to the same size, polish the best candidate and keep it only
    // on strict improvement.
    if fit.support.len() >= 2 && fit.norm > 1e-9 * initial_norm {
        let data: Vec<DMatrix<Complex64>> = (0..m_count).map(|m| y.block(m).clone()).collect();
        let keep = fit.support.len();
        let beam = work.top_cells(&data, RESCUE_BEAM);
        let mut best_alt: Option<Fit> = None;
        if keep == 2 && beam.len() >= 2 {
            // Pair case in closed form. Atom entries are unit modulus, so
            // every atom norm squared is its length g; the energy a pair
            // captures from z is then
            // (g(|t1|^2 + |t2|^2) - 2 Re(conj(t1) g12 t2)) / (g^2 - |g12|^2)
            // with t_i = e_i^H z and g12 = e_1^H e_2. Scan all beam pairs
            // and refit only the winner.
            let atoms: Vec<DVector<Complex64>> = beam.iter().map(|&c| work.atom(c)).collect();
            let zc = z.column(0).clone_owned();
            let g = atoms[0].len() as f64;
            let t: Vec<Complex64> = atoms.iter().map(|e| e.dotc(&zc)).collect();
            let mut best_pair = None;
            let mut best_captured = f64::NEG_INFINITY;
            for i in 0..beam.len() {
                for j in (i + 1)..beam.len() {
                    let g12 = atoms[i].dotc(&atoms[j]);
                    let det = g * g - g12.norm_sqr();
                    if det <= 1e-9 * g * g {
                        continue;
                    }
                    let captured = (g * (t[i].norm_sqr() + t[j].norm_sqr())
                        - 2.0 * (t[i].conj() * g12 * t[j]).re)
                        / det;
                    if captured > best_captured {
                        best_captured = captured;
                        best_pair = Some((beam[i], beam[j]));
                    }
                }
            }
            if let Some((c1, c2)) = best_pair {
                best_alt = Some(refit(y, &work, &z, vec![c1, c2])?);
            }
        } else {
            // Deeper supports: re-seed from each beam cell and complete
            // greedily back to the same size.
            for seed in beam {
                let mut cand = refit(y, &work, &z, vec![seed])?;
                while cand.support.len() < keep {
                    let (best, best_mag2) = work.best_cell(&cand.residual);
                    if best_mag2.sqrt() <= 1e-12 * initial_norm || cand.support.contains(&best) {
                        break;
                    }
                    let mut next = cand.support.clone();
                    next.push(best);
                    cand = refit(y, &work, &z, next)?;
                }
                if best_alt.as_ref().is_none_or(|b| cand.norm < b.norm) {
                    let done = cand.norm <= 1e-12 * initial_norm;
                    best_alt = Some(cand);
                    if done {
                        break;
                    }
                }
            }
        }
        if let Some(mut cand) = best_alt {
            polish(&mut cand, y, &work, &z, initial_norm, &mut Vec::new())?;
            if cand.norm < fit.norm * (1.0 - 1e-9) {
                residual_norms.push(cand.norm);
                fit = cand;
            }
        }
    }

    let tau = cfgm.cfg().pri_tau();
    let grid = cfgm.cfg().doppler_grid();
    let mut amplitudes = Vec::with_capacity(fit.support.len());
    let mut delays = Vec::with_capacity(fit.support.len());
    let mut azimuths = Vec::with_capacity(fit.support.len());
    let mut dopplers = Vec::with_capacity(fit.support.len());
    for (l, &(s, r, u)) in fit.support.iter().enumerate() {
        amplitudes.push(fit.alpha[(l, 0)]);
        delays.push(tau * s as f64 / cfgm.delay_cells() as f64);
        azimuths.push(cfgm.sine_azimuth_of(r));
        dopplers.push(grid[u]);
    }
    Ok(MimoRecovery {
        support: fit.support,
        amplitudes,
        delays,
        azimuths,
        dopplers,
        residual_norms,
    })
}

/// Detection bookkeeping after matching estimates to ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    /// Root-mean-square delay error over the matched pairs, seconds.
    /// None when nothing matched. Scale by c/2 for a range error.
    pub rmsle: Option<f64>,
}

/// Greedy one-to-one matching of estimates to truth.
///
/// A pair is matchable when it sits within one cell in every dimension
/// (`bins` = (delay s, sine azimuth, Doppler rad/s), all > 0, boundary
/// inclusive); closest normalized pairs match first. Unmatched truths count
/// as misses, unmatched estimates as false alarms.
pub fn match_detections(
    result: &MimoRecovery,
    truth: &[Target],
    bins: (f64, f64, f64),
) -> MatchReport {
    assert!(
        bins.0 > 0.0 && bins.1 > 0.0 && bins.2 > 0.0,
        "matching tolerances must be positive"
    );
    let slack = 1.0 + 1e-9;
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..result.len() {
        for (j, t) in truth.iter().enumerate() {
            let dd = (result.delays[i] - t.delay).abs();
            let da = (result.azimuths[i] - t.azimuth.sin()).abs();
            let dv = (result.dopplers[i] - t.doppler).abs();
            if dd <= bins.0 * slack && da <= bins.1 * slack && dv <= bins.2 * slack {
                let d2 = (dd / bins.0).powi(2) + (da / bins.1).powi(2) + (dv / bins.2).powi(2);
                cands.push((d2, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut est_used = vec![false; result.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut sq_err = 0.0;
    let mut hits = 0usize;
    for &(_, i, j) in &cands {
        if est_used[i] || truth_used[j] {
            continue;
        }
        est_used[i] = true;
        truth_used[j] = true;
        hits += 1;
        sq_err += (result.delays[i] - truth[j].delay).powi(2);
    }
    MatchReport {
        hits,
        misses: truth.len() - hits,
        false_alarms: result.len() - hits,
        rmsle: (hits > 0).then(|| (sq_err / hits as f64).sqrt()),
    }
}
