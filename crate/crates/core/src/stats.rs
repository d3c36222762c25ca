//! Tail probabilities and special functions used by the detectors and bounds.

use crate::{Error, Result};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Gaussian right-tail probability Q(x) = P(N(0,1) > x).
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Lower incomplete gamma, unnormalized: integral of t^{a-1} e^{-t} over [0, b].
pub fn lower_incomplete_gamma(a: f64, b: f64) -> f64 {
    statrs::function::gamma::gamma_li(a, b)
}

/// Survival function of the noncentral chi-square with 2 degrees of freedom
/// and noncentrality `lambda`, evaluated as a Poisson mixture of central
/// chi-square tails: Q(x) = sum_j Pois(j; lambda/2) * Q_{chi2, 2+2j}(x).
///
/// Weights are accumulated outward from the Poisson mode so the sum stays
/// stable for large noncentralities where e^{-lambda/2} underflows.
pub fn noncentral_chi2_sf(x: f64, lambda: f64) -> f64 {
    assert!(x >= 0.0 && lambda >= 0.0, "domain: x, lambda >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return (-x / 2.0).exp();
    }
    let h = lambda / 2.0;
    let mode = h.floor().max(0.0);
    let ln_w_mode = -h + mode * h.ln() - ln_gamma(mode + 1.0);
    let tail = |j: f64| gamma_ur(j + 1.0, x / 2.0);

    let mut total = ln_w_mode.exp() * tail(mode);
    // Upward from the mode: w_{j+1} = w_j * h / (j+1).
    let mut w = ln_w_mode.exp();
    let mut j = mode;
    loop {
        w *= h / (j + 1.0);
        j += 1.0;
        let term = w * tail(j);
        total += term;
        if w < 1e-18 || (term < total * 1e-17 && j > h) {
            break;
        }
    }
    // Downward from the mode: w_{j-1} = w_j * j / h.
    let mut w = ln_w_mode.exp();
    let mut j = mode;
    while j > 0.0 {
        w *= j / h;
        j -= 1.0;
        let term = w * tail(j);
        total += term;
        if w < 1e-18 {
            break;
        }
    }
    total.min(1.0)
}

/// Inverse survival function of the noncentral chi-square with 2 degrees of
/// freedom: the x with Q(x; lambda) = p, found by bisection.
pub fn noncentral_chi2_isf(p: f64, lambda: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail probability must lie in (0, 1), got {p}"
        )));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noncentrality must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        // Central case has the closed form Q(x) = e^{-x/2}.
        return Ok(-2.0 * p.ln());
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * (lambda + 2.0);
    while noncentral_chi2_sf(hi, lambda) > p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidInput(format!(
                "quantile out of range for p = {p}, lambda = {lambda}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if noncentral_chi2_sf(mid, lambda) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Modified Bessel I0 by its power series, for the quadrature oracle only.
    fn bessel_i0(z: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let q = z * z / 4.0;
        for k in 1..200 {
            term *= q / ((k * k) as f64);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum
    }

    /// Oracle: integrate the noncentral chi-square(2, lambda) density
    /// f(x) = 0.5 e^{-(x+lambda)/2} I0(sqrt(lambda x)) over [x0, inf) by
    /// Simpson's rule on a generous truncated interval.
    fn sf_by_quadrature(x0: f64, lambda: f64) -> f64 {
        let hi = (lambda + 2.0) + 60.0 * (2.0 * (2.0 + 2.0 * lambda)).sqrt() + x0;
        let n = 200_000;
        let h = (hi - x0) / n as f64;
        let f = |x: f64| 0.5 * (-(x + lambda) / 2.0).exp() * bessel_i0((lambda * x).sqrt());
        let mut acc = f(x0) + f(hi);
        for i in 1..n {
            let x = x0 + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }

    #[test]
    fn central_closed_form() {
        for &p in &[0.5, 1e-3, 1e-9] {
            let x = noncentral_chi2_isf(p, 0.0).unwrap();
            assert_relative_eq!(x, -2.0 * p.ln(), epsilon = 1e-12);
            assert_relative_eq!(noncentral_chi2_sf(x, 0.0), p, max_relative = 1e-12);
        }
    }

    #[test]
    fn sf_matches_quadrature() {
        for &(x, lambda) in &[(3.0, 5.0), (12.0, 5.0), (30.0, 5.0), (150.0, 100.0)] {
            let q = noncentral_chi2_sf(x, lambda);
            let oracle = sf_by_quadrature(x, lambda);
            assert_relative_eq!(q, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn isf_round_trip() {
        for &lambda in &[0.5, 5.0, 100.0, 1000.0] {
            for &p in &[0.3, 1e-3, 1e-9, 5e-11] {
                let x = noncentral_chi2_isf(p, lambda).unwrap();
                assert_relative_eq!(noncentral_chi2_sf(x, lambda), p, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn isf_monotone_in_p_and_lambda() {
        let a = noncentral_chi2_isf(1e-3, 5.0).unwrap();
        let b = noncentral_chi2_isf(1e-4, 5.0).unwrap();
        assert!(b > a);
        let c = noncentral_chi2_isf(1e-3, 10.0).unwrap();
        assert!(c > a);
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(noncentral_chi2_isf(0.0, 1.0).is_err());
        assert!(noncentral_chi2_isf(1.0, 1.0).is_err());
        assert!(noncentral_chi2_isf(0.5, -1.0).is_err());
    }

    #[test]
    fn gaussian_q_known_values() {
        assert_relative_eq!(gaussian_q(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(gaussian_q(1.6448536269514722), 0.05, max_relative = 1e-9);
    }

    #[test]
    fn lower_incomplete_gamma_matches_quadrature() {
        // gamma(3/2, b) = integral of sqrt(t) e^{-t} over [0, b].
        for &b in &[0.5, 2.0, 8.0] {
            let n = 400_000;
            let h = b / n as f64;
            let f = |t: f64| t.sqrt() * (-t).exp();
            let mut acc = f(1e-300) + f(b);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            let oracle = acc * h / 3.0;
            assert_relative_eq!(lower_incomplete_gamma(1.5, b), oracle, max_relative = 1e-6);
        }
        // Saturates to Gamma(3/2) = sqrt(pi)/2.
        assert_relative_eq!(
            lower_incomplete_gamma(1.5, 60.0),
            std::f64::consts::PI.sqrt() / 2.0,
            max_relative = 1e-12
        );
    }
}
