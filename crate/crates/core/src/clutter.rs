//! Clutter covariance, tone whitening, and whitened recovery.
//!
//! Homogeneous clutter plus white noise disturbs every tone identically:
//! across pulses the disturbance vector has the Toeplitz covariance
//!   M(m) = C sigma_c^2 e^{-j v_d m tau - (1/2) sigma_d^2 m^2 tau^2}
//!          + (sigma_n^2 / tau) delta_m,
//! which assumes a unit-magnitude spectrum (|H[k]| = 1); configurations fed
//! through this module should be normalized accordingly. Whitening
//! multiplies the pulse dimension by M^{-1/2}; recovery then runs the
//! two-dictionary pursuit against whitened Doppler atoms M^{-1/2} f_u,
//! which is the matched filter for the coloured disturbance.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::focusing::RecoveryResult;
use crate::pursuit::{omp_2d, Gate, Omp2dOptions};
use crate::scene::{ClutterModel, RadarConfig};
use crate::xampling::XampledData;
use crate::{Error, Result};

/// P x P Hermitian Toeplitz disturbance covariance across pulses.
#[derive(Debug, Clone)]
pub struct ClutterCovariance {
    pub matrix: DMatrix<Complex64>,
    pub pri_tau: f64,
}

impl ClutterCovariance {
    pub fn pulses(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Evaluate the disturbance covariance for a clutter model and noise level.
pub fn clutter_covariance(
    model: &ClutterModel,
    noise_var: f64,
    cfg: &RadarConfig,
) -> Result<ClutterCovariance> {
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    if !(model.mean_power.is_finite() && model.mean_power >= 0.0) {
        return Err(Error::InvalidInput("clutter mean_power must be >= 0".into()));
    }
    if !(model.doppler_std.is_finite() && model.doppler_std >= 0.0) {
        return Err(Error::InvalidInput("clutter doppler_std must be >= 0".into()));
    }
    let tau = cfg.pri_tau();
    let p = cfg.pulses();
    let scale = model.count as f64 * model.mean_power;
    let matrix = DMatrix::from_fn(p, p, |row, col| {
        // Entry (p, q) is E[c_p c_q^*]; the scatterer phase e^{-j v p tau}
        // makes the lag m = p - q.
        let m = row as f64 - col as f64;
        let mag = scale * (-0.5 * model.doppler_std.powi(2) * m * m * tau * tau).exp();
        let mut v = Complex64::from_polar(mag, -model.doppler_mean * m * tau);
        if row == col {
            v += noise_var / tau;
        }
        v
    });
    Ok(ClutterCovariance {
        matrix,
        pri_tau: tau,
    })
}

/// U diag(lambda^exponent) U^H of a Hermitian positive definite matrix.
/// Rejects matrices with a non-positive eigenvalue; barely-positive ones
/// are floored at 1e-12 * trace / P for numerical robustness.
fn hermitian_power(m: &DMatrix<Complex64>, exponent: f64) -> Result<DMatrix<Complex64>> {
    let p = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min.is_finite() && min > 0.0) {
        return Err(Error::NotPositiveDefinite(min));
    }
    let trace: f64 = eig.eigenvalues.iter().sum();
    let floor = 1e-12 * trace / p as f64;
    let powered: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(floor).powf(exponent))
        .collect();
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (col, &l) in powered.iter().enumerate() {
        scaled.column_mut(col).scale_mut(l);
    }
    Ok(&scaled * u.adjoint())
}

/// Whiten the pulse dimension: each tone's P-vector is multiplied by
/// M^{-1/2}. Input and output are K x P in tone-major layout.
pub fn whiten(data: &XampledData, cov: &ClutterCovariance) -> Result<DMatrix<Complex64>> {
    if cov.pulses() != data.pulses() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{} but data has {} pulses",
            cov.pulses(),
            cov.pulses(),
            data.pulses()
        )));
    }
    let root = hermitian_power(&cov.matrix, -0.5)?;
    // Row k of the output is (M^{-1/2} b_k)^T.
    Ok(&data.coeffs * root.transpose())
}

/// Inverse of `whiten` (multiplies by M^{+1/2}).
pub fn unwhiten(whitened: &DMatrix<Complex64>, cov: &ClutterCovariance) -> Result<DMatrix<Complex64>> {
    if cov.pulses() != whitened.ncols() {
        return Err(Error::DimensionMismatch(
            "covariance size does not match the pulse dimension".into(),
        ));
    }
    let root = hermitian_power(&cov.matrix, 0.5)?;
    Ok(whitened * root.transpose())
}

/// Whitened delay-Doppler recovery.
///
/// Whitens the pulse dimension, then runs the two-dictionary pursuit on
/// C M^{-T/2} with tone atoms d1[k,n] = (H[kappa_k]/tau) e^{-j2pi kappa_k n/N}
/// and pulse atoms M^{-1/2} f_u, the matched filter in whitened space. Under
/// disturbance alone each projection normalized by its atom norms is a
/// two-degree chi-square, so `gamma` is commensurate with the unwhitened
/// detection threshold; pass 0 with a bounded `max_iter` for known-count
/// recovery.
pub fn whitened_recover(
    data: &XampledData,
    cov: &ClutterCovariance,
    gamma: f64,
    max_iter: usize,
) -> Result<RecoveryResult> {
    let whitened = whiten(data, cov)?;
    let k = data.coeffs.nrows();
    let p = data.pulses();
    let n = data.n_bins;
    let tau = data.pri_tau;
    let two_pi = 2.0 * std::f64::consts::PI;

    let root = hermitian_power(&cov.matrix, -0.5)?;
    // Doppler steering across pulses on the centered grid.
    let grid: Vec<f64> = (0..p)
        .map(|u| -std::f64::consts::PI / tau + two_pi * u as f64 / (p as f64 * tau))
        .collect();
    let f_p = DMatrix::<Complex64>::from_fn(p, p, |pulse, u| {
        Complex64::from_polar(1.0, -grid[u] * pulse as f64 * tau)
    });
    let d1 = DMatrix::<Complex64>::from_fn(k, n, |row, col| {
        data.h_kappa[row] / tau
            * Complex64::from_polar(
                1.0,
                -two_pi * data.kappa.indices[row] as f64 * col as f64 / n as f64,
            )
    });
    let d2t = &root * &f_p;

    let left: Vec<f64> = (0..n).map(|r| d1.column(r).norm_squared()).collect();
    let right: Vec<f64> = (0..p).map(|u| d2t.column(u).norm_squared()).collect();
    let gate = Gate {
        gamma,
        sigma2: 0.5,
        left,
        right,
    };
    let out = omp_2d(&d1, &d2t, &whitened, &Omp2dOptions::new(max_iter).with_gate(gate))?;

    let mut delays = Vec::with_capacity(out.support.len());
    let mut dopplers = Vec::with_capacity(out.support.len());
    for &(r, u) in &out.support {
        delays.push(tau * r as f64 / n as f64);
        dopplers.push(grid[u]);
    }
    Ok(RecoveryResult {
        support: out.support,
        amplitudes: out.coefficients,
        delays,
        dopplers,
        residual_norms: out.residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focusing::{doppler_focus, omp_delay_doppler};
    use crate::scene::{synthesize_fourier_at, Target, TargetScene};
    use crate::xampling::FrequencyIndexSet;
    use approx::assert_relative_eq;

    /// Unit PRI, flat spectrum with |H[k]| = 1 as the covariance model assumes.
    fn unit_h_cfg(pulses: usize, bins: usize) -> RadarConfig {
        RadarConfig::flat(1.0, pulses, bins as f64, 0.0, bins as f64).unwrap()
    }

    #[test]
    fn clutter_free_covariance_is_scaled_identity() {
        let cfg = unit_h_cfg(6, 8);
        let model = ClutterModel {
            count: 10,
            mean_power: 0.0,
            doppler_mean: 1.0,
            doppler_std: 0.5,
        };
        let cov = clutter_covariance(&model, 0.4, &cfg).unwrap();
        for p in 0..6 {
            for q in 0..6 {
                let expect = if p == q { 0.4 } else { 0.0 };
                assert_relative_eq!(cov.matrix[(p, q)].re, expect, epsilon = 1e-12);
                assert_relative_eq!(cov.matrix[(p, q)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_spread_covariance_is_rank_one_plus_identity() {
        let cfg = unit_h_cfg(5, 8);
        let model = ClutterModel {
            count: 20,
            mean_power: 0.3,
            doppler_mean: 0.0,
            doppler_std: 0.0,
        };
        let cov = clutter_covariance(&model, 0.2, &cfg).unwrap();
        for p in 0..5 {
            for q in 0..5 {
                let expect = 6.0 + if p == q { 0.2 } else { 0.0 };
                assert_relative_eq!(cov.matrix[(p, q)].re, expect, epsilon = 1e-12);
                assert_relative_eq!(cov.matrix[(p, q)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn covariance_is_hermitian_toeplitz() {
        let cfg = unit_h_cfg(7, 8);
        let model = ClutterModel {
            count: 15,
            mean_power: 0.7,
            doppler_mean: 1.3,
            doppler_std: 0.4,
        };
        let cov = clutter_covariance(&model, 0.1, &cfg).unwrap();
        for p in 0..7 {
            for q in 0..7 {
                let a = cov.matrix[(p, q)];
                let b = cov.matrix[(q, p)].conj();
                assert_eq!(a, b, "Hermitian symmetry at ({p},{q})");
                if p + 1 < 7 && q + 1 < 7 {
                    assert_eq!(a, cov.matrix[(p + 1, q + 1)], "Toeplitz at ({p},{q})");
                }
            }
        }
    }

    #[test]
    fn covariance_matches_sample_covariance_of_synthesis() {
        // Monte Carlo: the empirical covariance of disturbance columns
        // (clutter + noise, per tone, across pulses) converges to the
        // closed-form Toeplitz matrix.
        let pulses = 6;
        let bins = 4;
        let cfg = unit_h_cfg(pulses, bins);
        let model = ClutterModel {
            count: 30,
            mean_power: 0.5,
            doppler_mean: 0.8,
            doppler_std: 0.4,
        };
        let noise_var = 0.3;
        let cov = clutter_covariance(&model, noise_var, &cfg).unwrap();
        let scene = TargetScene {
            targets: vec![],
            clutter: Some(model),
            noise_var,
        };
        let kappa = FrequencyIndexSet::full(bins);
        let mut sample = DMatrix::<Complex64>::zeros(pulses, pulses);
        let mut count = 0usize;
        for seed in 0..2500u64 {
            let data = synthesize_fourier_at(&cfg, &scene, &kappa, seed).unwrap();
            for k in 0..bins {
                for p in 0..pulses {
                    for q in 0..pulses {
                        sample[(p, q)] += data.coeffs[(k, p)] * data.coeffs[(k, q)].conj();
                    }
                }
                count += 1;
            }
        }
        sample /= Complex64::new(count as f64, 0.0);
        let err = (&sample - &cov.matrix).norm() / cov.matrix.norm();
        assert!(err < 0.05, "relative Frobenius deviation {err}");
    }

    #[test]
    fn identity_covariance_whitening_is_identity() {
        // sigma_c^2 = 0 and sigma_n^2 = tau give M = I.
        let cfg = unit_h_cfg(4, 8);
        let model = ClutterModel {
            count: 5,
            mean_power: 0.0,
            doppler_mean: 0.0,
            doppler_std: 0.1,
        };
        let cov = clutter_covariance(&model, cfg.pri_tau(), &cfg).unwrap();
        let scene = TargetScene::noiseless(vec![Target::new(0.25, 1.0, Complex64::new(1.0, -0.5))]);
        let data = synthesize_fourier_at(&cfg, &scene, &FrequencyIndexSet::full(8), 0).unwrap();
        let w = whiten(&data, &cov).unwrap();
        assert!((&w - &data.coeffs).norm() < 1e-10);
    }

    #[test]
    fn whitened_disturbance_has_identity_covariance() {
        let pulses = 5;
        let bins = 4;
        let cfg = unit_h_cfg(pulses, bins);
        let model = ClutterModel {
            count: 25,
            mean_power: 0.6,
            doppler_mean: -0.5,
            doppler_std: 0.3,
        };
        let noise_var = 0.2;
        let cov = clutter_covariance(&model, noise_var, &cfg).unwrap();
        let scene = TargetScene {
            targets: vec![],
            clutter: Some(model),
            noise_var,
        };
        let kappa = FrequencyIndexSet::full(bins);
        let mut sample = DMatrix::<Complex64>::zeros(pulses, pulses);
        let mut count = 0usize;
        for seed in 0..2500u64 {
            let data = synthesize_fourier_at(&cfg, &scene, &kappa, seed).unwrap();
            let w = whiten(&data, &cov).unwrap();
            for k in 0..bins {
                for p in 0..pulses {
                    for q in 0..pulses {
                        sample[(p, q)] += w[(k, p)] * w[(k, q)].conj();
                    }
                }
                count += 1;
            }
        }
        sample /= Complex64::new(count as f64, 0.0);
        let eye = DMatrix::<Complex64>::identity(pulses, pulses);
        let err = (&sample - &eye).norm() / eye.norm();
        assert!(err < 0.05, "relative Frobenius deviation from identity {err}");
    }

    #[test]
    fn whiten_round_trips_through_unwhiten() {
        let cfg = unit_h_cfg(6, 8);
        let model = ClutterModel {
            count: 12,
            mean_power: 0.9,
            doppler_mean: 0.7,
            doppler_std: 0.25,
        };
        let cov = clutter_covariance(&model, 0.15, &cfg).unwrap();
        let scene = TargetScene {
            targets: vec![Target::new(0.4, -1.0, Complex64::new(0.3, 0.8))],
            clutter: Some(model),
            noise_var: 0.15,
        };
        let data = synthesize_fourier_at(&cfg, &scene, &FrequencyIndexSet::full(8), 11).unwrap();
        let w = whiten(&data, &cov).unwrap();
        let back = unwhiten(&w, &cov).unwrap();
        assert!((&back - &data.coeffs).norm() < 1e-9 * data.coeffs.norm());
    }

    #[test]
    fn non_positive_definite_covariance_is_rejected() {
        let cov = ClutterCovariance {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ])),
            pri_tau: 1.0,
        };
        let cfg = unit_h_cfg(2, 4);
        let scene = TargetScene::noiseless(vec![]);
        let data = synthesize_fourier_at(&cfg, &scene, &FrequencyIndexSet::full(4), 0).unwrap();
        assert!(matches!(
            whiten(&data, &cov),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn identity_disturbance_recovery_matches_unwhitened_pursuit() {
        // With M proportional to I the whitened pipeline must select the
        // same support as plain focused pursuit, and the conjugation
        // convention must return the true amplitudes.
        let bins = 16;
        let pulses = 8;
        let cfg = unit_h_cfg(pulses, bins);
        let grid = cfg.doppler_grid();
        let targets = vec![
            Target::new(3.0 / 16.0, grid[2], Complex64::new(1.0, 0.4)),
            Target::new(10.0 / 16.0, grid[6], Complex64::new(-0.7, 0.2)),
        ];
        let scene = TargetScene::noiseless(targets.clone());
        let kappa = FrequencyIndexSet::lowpass(bins, 8).unwrap();
        let data = synthesize_fourier_at(&cfg, &scene, &kappa, 0).unwrap();

        let model = ClutterModel {
            count: 1,
            mean_power: 0.0,
            doppler_mean: 0.0,
            doppler_std: 0.0,
        };
        let cov = clutter_covariance(&model, cfg.pri_tau(), &cfg).unwrap();
        let whitened = whitened_recover(&data, &cov, 0.0, 2).unwrap();
        let focused = doppler_focus(&data).unwrap();
        let plain = omp_delay_doppler(&focused, 0.0, 1.0, 2).unwrap();

        let mut a = whitened.support.clone();
        let mut b = plain.support.clone();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        for (l, &(r, _)) in whitened.support.iter().enumerate() {
            let truth = targets
                .iter()
                .find(|t| (t.delay * bins as f64).round() as usize == r)
                .unwrap();
            assert!((whitened.amplitudes[l] - truth.amplitude).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_input_recovers_nothing() {
        let cfg = unit_h_cfg(4, 8);
        let model = ClutterModel {
            count: 10,
            mean_power: 0.2,
            doppler_mean: 0.0,
            doppler_std: 0.3,
        };
        let cov = clutter_covariance(&model, 0.1, &cfg).unwrap();
        let scene = TargetScene::noiseless(vec![]);
        let data = synthesize_fourier_at(&cfg, &scene, &FrequencyIndexSet::full(8), 0).unwrap();
        let out = whitened_recover(&data, &cov, 0.0, 3).unwrap();
        assert!(out.support.is_empty());
    }

    #[test]
    fn whitening_beats_plain_pursuit_under_narrowband_clutter() {
        // Two targets away from the clutter ridge at SCNR -10 dB: whitened
        // recovery keeps finding them while plain focused pursuit locks
        // onto the ridge. Also checks the mean detection statistic at the
        // true cells improves with whitening.
        let bins = 16;
        let pulses = 16;
        let k = 8;
        let cfg = unit_h_cfg(pulses, bins);
        let grid = cfg.doppler_grid();
        let model = ClutterModel {
            count: 50,
            mean_power: 9.9 / 50.0,
            doppler_mean: 0.0,
            doppler_std: 0.05,
        };
        let noise_var = 0.1;
        let cov = clutter_covariance(&model, noise_var, &cfg).unwrap();
        let truth = [(3usize, 3usize), (11, 12)];
        let targets: Vec<Target> = truth
            .iter()
            .map(|&(r, u)| Target::new(r as f64 / bins as f64, grid[u], Complex64::new(1.0, 0.0)))
            .collect();
        let scene = TargetScene {
            targets,
            clutter: Some(model),
            noise_var,
        };
        let kappa = FrequencyIndexSet::lowpass(bins, k).unwrap();

        let trials = 200;
        let mut whit_hits = 0;
        let mut plain_hits = 0;
        for seed in 0..trials as u64 {
            let data = synthesize_fourier_at(&cfg, &scene, &kappa, seed).unwrap();
            let w = whitened_recover(&data, &cov, 0.0, 2).unwrap();
            let mut ws = w.support.clone();
            ws.sort_unstable();
            if ws == truth {
                whit_hits += 1;
            }
            let focused = doppler_focus(&data).unwrap();
            let plain = omp_delay_doppler(&focused, 0.0, 1.0, 2).unwrap();
            let mut ps = plain.support.clone();
            ps.sort_unstable();
            if ps == truth {
                plain_hits += 1;
            }
        }
        assert!(
            whit_hits >= (0.9 * trials as f64) as usize,
            "whitened hit rate {whit_hits}/{trials}"
        );
        assert!(
            plain_hits <= trials / 2,
            "plain hit rate unexpectedly high: {plain_hits}/{trials}"
        );
    }
}
