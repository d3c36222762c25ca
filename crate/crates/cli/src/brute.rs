//! Exhaustive sparse baseline for cross-checking greedy recovery.

use anyhow::{bail, Result};
use nalgebra::{Complex, DMatrix};
use subnyq::pursuit::lstsq;

type Complex64 = Complex<f64>;

/// Supports per exhaustive run beyond which we refuse to enumerate.
pub const BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone)]
pub struct BruteResult {
    /// Selected dictionary columns, ascending.
    pub support: Vec<usize>,
    pub amplitudes: Vec<Complex64>,
    pub residual_norm: f64,
}

fn combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Best L-sparse least-squares fit of `y` over the columns of `dict` by
/// exhaustive search.
///
/// Enumeration is lexicographic and only a strictly smaller residual
/// replaces the incumbent, so ties resolve to the lexicographically first
/// support. Refuses runs with more than [`BUDGET`] candidate supports.
pub fn brute_force_sparse(
    y: &DMatrix<Complex64>,
    dict: &DMatrix<Complex64>,
    l: usize,
) -> Result<BruteResult> {
    if y.ncols() != 1 {
        bail!("measurement must be a column vector, got {} columns", y.ncols());
    }
    if dict.nrows() != y.nrows() {
        bail!(
            "dictionary has {} rows but the measurement has {}",
            dict.nrows(),
            y.nrows()
        );
    }
    if l == 0 || l > dict.ncols() {
        bail!("sparsity {} out of range for {} atoms", l, dict.ncols());
    }
    let count = combinations(dict.ncols(), l);
    if count > BUDGET {
        bail!(
            "{count} candidate supports exceed the exhaustive budget of {BUDGET}"
        );
    }

    let mut idx: Vec<usize> = (0..l).collect();
    let mut best: Option<BruteResult> = None;
    loop {
        let cols: Vec<_> = idx.iter().map(|&j| dict.column(j)).collect();
        let a = DMatrix::from_columns(&cols);
        if let Ok(x) = lstsq(&a, y) {
            let resid = (y - &a * &x).norm();
            if best.as_ref().is_none_or(|b| resid < b.residual_norm) {
                best = Some(BruteResult {
                    support: idx.clone(),
                    amplitudes: x.column(0).iter().cloned().collect(),
                    residual_norm: resid,
                });
            }
        }
        // Advance to the next combination in lexicographic order.
        let n = dict.ncols();
        let mut i = l;
        loop {
            if i == 0 {
                return best.ok_or_else(|| {
                    anyhow::anyhow!("every candidate support produced a singular system")
                });
            }
            i -= 1;
            if idx[i] != i + n - l {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..l {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use subnyq::rng::{complex_gaussian, stream_rng};

    fn random_dict(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = stream_rng(seed, 3);
        let mut d = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                d[(i, j)] = complex_gaussian(&mut rng);
            }
            let norm = d.column(j).norm();
            for i in 0..rows {
                d[(i, j)] /= norm;
            }
        }
        d
    }

    #[test]
    fn one_sparse_recovery_is_the_best_matched_projection() {
        // For L=1 the exhaustive answer must be the atom with the largest
        // |<y, d_j>| since all atoms have unit norm.
        for seed in 0..20u64 {
            let dict = random_dict(12, 30, seed);
            let mut rng = stream_rng(seed, 0);
            let j = rng.random_range(0..30usize);
            let amp = complex_gaussian(&mut rng);
            let y = DMatrix::from_column_slice(
                12,
                1,
                &dict.column(j).iter().map(|v| v * amp).collect::<Vec<_>>(),
            );
            let mut best_j = 0;
            let mut best_p = -1.0;
            for c in 0..30 {
                let p = dict.column(c).dotc(&y.column(0)).norm();
                if p > best_p {
                    best_p = p;
                    best_j = c;
                }
            }
            let got = brute_force_sparse(&y, &dict, 1).unwrap();
            assert_eq!(got.support, vec![best_j]);
            assert_eq!(best_j, j);
            assert!(got.residual_norm < 1e-10);
        }
    }

    #[test]
    fn exact_two_sparse_signals_are_recovered() {
        for seed in 0..10u64 {
            let dict = random_dict(10, 24, seed + 100);
            let truth = [3usize, 17];
            let a0 = Complex64::new(1.0, -0.5);
            let a1 = Complex64::new(-0.7, 0.2);
            let mut y = DMatrix::zeros(10, 1);
            for i in 0..10 {
                y[(i, 0)] = dict[(i, truth[0])] * a0 + dict[(i, truth[1])] * a1;
            }
            let got = brute_force_sparse(&y, &dict, 2).unwrap();
            assert_eq!(got.support, truth.to_vec());
            assert!((got.amplitudes[0] - a0).norm() < 1e-8);
            assert!((got.amplitudes[1] - a1).norm() < 1e-8);
        }
    }

    #[test]
    fn oversized_problems_are_refused_up_front() {
        // C(10000, 3) is about 1.7e11, far over budget; the guard must trip
        // before any allocation of that size happens.
        let y = DMatrix::zeros(4, 1);
        let dict = DMatrix::zeros(4, 10_000);
        let err = brute_force_sparse(&y, &dict, 3).unwrap_err();
        assert!(err.to_string().contains("budget"));
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let dict = random_dict(8, 12, 1);
        let y = DMatrix::zeros(7, 1);
        assert!(brute_force_sparse(&y, &dict, 1).is_err());
        let y = DMatrix::zeros(8, 2);
        assert!(brute_force_sparse(&y, &dict, 1).is_err());
        let y = DMatrix::zeros(8, 1);
        assert!(brute_force_sparse(&y, &dict, 0).is_err());
        assert!(brute_force_sparse(&y, &dict, 13).is_err());
    }
}
