//! Thin FFT helpers over rustfft.
//!
//! Conventions: `fft` computes the unnormalized forward transform
//! X[k] = sum_n x[n] e^{-j2pi kn/N}; `ifft` the unnormalized inverse
//! sum_k X[k] e^{+j2pi kn/N}. Callers apply their own 1/N factors.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub fn fft_in_place(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

pub fn ifft_in_place(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(data.len()).process(data);
}

pub fn fft(data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    fft_in_place(&mut buf);
    buf
}

pub fn ifft(data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    ifft_in_place(&mut buf);
    buf
}

/// DFT index -> signed frequency index, with bins above N/2 wrapped negative.
pub fn signed_index(k: usize, n: usize) -> i64 {
    let k = k as i64;
    let n = n as i64;
    if k <= (n - 1) / 2 {
        k
    } else {
        k - n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trip() {
        let x: Vec<Complex64> = (0..12)
            .map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let y = ifft(&fft(&x));
        for (a, b) in x.iter().zip(y.iter()) {
            assert_relative_eq!(a.re, b.re / 12.0, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im / 12.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_tone() {
        let n = 16;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * i as f64 / 16.0))
            .collect();
        let y = fft(&x);
        assert_relative_eq!(y[3].re, 16.0, epsilon = 1e-10);
        for (k, v) in y.iter().enumerate() {
            if k != 3 {
                assert!(v.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn signed_indices() {
        assert_eq!(signed_index(0, 8), 0);
        assert_eq!(signed_index(3, 8), 3);
        assert_eq!(signed_index(4, 8), -4);
        assert_eq!(signed_index(7, 8), -1);
        assert_eq!(signed_index(2, 5), 2);
        assert_eq!(signed_index(3, 5), -2);
    }
}
