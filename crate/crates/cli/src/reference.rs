//! Nyquist-rate matched-filter reference processor.
//!
//! Classic chain for cross-checking the sub-Nyquist pipeline: sample each
//! PRI at the full signal bandwidth, matched-filter per pulse in the
//! frequency domain, correlate across pulses against the Doppler grid, and
//! pick peaks off the delay-Doppler map.

use anyhow::Result;
use nalgebra::{Complex, DMatrix};
use subnyq::fft;
use subnyq::scene::{synthesize_time, RadarConfig, TargetScene};

type Complex64 = Complex<f64>;

#[derive(Debug, Clone)]
pub struct NyquistReference {
    /// N x P delay-Doppler magnitude-squared map.
    pub map: DMatrix<f64>,
    /// Up to `l_max` detected (delay bin, Doppler bin) cells, strongest
    /// first.
    pub support: Vec<(usize, usize)>,
    pub delays: Vec<f64>,
    pub dopplers: Vec<f64>,
}

/// Matched-filter processing at the full rate.
///
/// Sampling at B_h gives exactly N samples per PRI, so the per-pulse DFT
/// recovers the N transmit-band Fourier coefficients; multiplying by
/// conj(H) and inverting yields the pulse-compressed range profile, and a
/// length-P correlation against each grid Doppler focuses slow time.
/// Detections are the `l_max` strongest local maxima of the map.
pub fn nyquist_reference(
    cfg: &RadarConfig,
    scene: &TargetScene,
    seed: u64,
    l_max: usize,
) -> Result<NyquistReference> {
    let n = cfg.nyquist_bins();
    let p = cfg.pulses();
    let frames = synthesize_time(cfg, scene, cfg.bandwidth(), seed)?;
    assert_eq!(frames.samples.nrows(), n, "critical sampling must give N samples");

    // Per-pulse frequency-domain matched filter.
    let mut compressed = DMatrix::<Complex64>::zeros(n, p);
    for pulse in 0..p {
        let mut buf: Vec<Complex64> = frames.samples.column(pulse).iter().cloned().collect();
        fft::fft_in_place(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= cfg.spectrum()[k].conj() / n as f64;
        }
        fft::ifft_in_place(&mut buf);
        for (r, v) in buf.into_iter().enumerate() {
            compressed[(r, pulse)] = v;
        }
    }

    // Slow-time correlation against the centered Doppler grid.
    let grid = cfg.doppler_grid();
    let tau = cfg.pri_tau();
    let mut map = DMatrix::<f64>::zeros(n, p);
    for (u, &nu) in grid.iter().enumerate() {
        let steers: Vec<Complex64> = (0..p)
            .map(|m| Complex64::from_polar(1.0, nu * m as f64 * tau))
            .collect();
        for r in 0..n {
            let mut acc = Complex64::default();
            for m in 0..p {
                acc += compressed[(r, m)] * steers[m];
            }
            map[(r, u)] = acc.norm_sqr();
        }
    }

    let support = top_local_maxima(&map, l_max);
    let delays = support.iter().map(|&(r, _)| r as f64 * cfg.delay_bin()).collect();
    let dopplers = support.iter().map(|&(_, u)| grid[u]).collect();
    Ok(NyquistReference {
        map,
        support,
        delays,
        dopplers,
    })
}

/// Strongest `l_max` local maxima (4-neighborhood, delay edges clamped,
/// Doppler non-periodic), strongest first; ties break toward the lower
/// (row, col).
fn top_local_maxima(map: &DMatrix<f64>, l_max: usize) -> Vec<(usize, usize)> {
    let (n, p) = map.shape();
    let mut peaks: Vec<(f64, usize, usize)> = Vec::new();
    for r in 0..n {
        for u in 0..p {
            let v = map[(r, u)];
            let mut is_peak = v > 0.0;
            let mut check = |rr: usize, uu: usize| {
                if map[(rr, uu)] > v {
                    is_peak = false;
                }
            };
            if r > 0 {
                check(r - 1, u);
            }
            if r + 1 < n {
                check(r + 1, u);
            }
            if u > 0 {
                check(r, u - 1);
            }
            if u + 1 < p {
                check(r, u + 1);
            }
            if is_peak {
                peaks.push((v, r, u));
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    peaks.truncate(l_max);
    peaks.into_iter().map(|(_, r, u)| (r, u)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use subnyq::scene::Target;

    fn unit_cfg(pulses: usize, bins: usize) -> RadarConfig {
        RadarConfig::flat(1.0, pulses, bins as f64, 0.0, 1.0).unwrap()
    }

    #[test]
    fn on_grid_target_peaks_exactly_at_its_cell() {
        let cfg = unit_cfg(8, 32);
        let r0 = 11usize;
        let u0 = 5usize;
        let target = Target::new(
            r0 as f64 * cfg.delay_bin(),
            cfg.doppler_grid()[u0],
            Complex64::new(0.9, 0.3),
        );
        let scene = TargetScene::noiseless(vec![target]);
        let out = nyquist_reference(&cfg, &scene, 7, 1).unwrap();
        assert_eq!(out.support, vec![(r0, u0)]);
        // Every other cell is strictly below the peak.
        let peak = out.map[(r0, u0)];
        for r in 0..32 {
            for u in 0..8 {
                if (r, u) != (r0, u0) {
                    assert!(out.map[(r, u)] < peak * 1e-6);
                }
            }
        }
    }

    #[test]
    fn separated_pair_is_resolved_into_two_peaks() {
        let cfg = unit_cfg(8, 32);
        let cells = [(4usize, 2usize), (9usize, 6usize)];
        let targets: Vec<Target> = cells
            .iter()
            .map(|&(r, u)| {
                Target::new(
                    r as f64 * cfg.delay_bin(),
                    cfg.doppler_grid()[u],
                    Complex64::new(1.0, 0.0),
                )
            })
            .collect();
        let scene = TargetScene::noiseless(targets);
        let out = nyquist_reference(&cfg, &scene, 3, 2).unwrap();
        let mut got = out.support.clone();
        got.sort_unstable();
        assert_eq!(got, cells.to_vec());
    }
}
