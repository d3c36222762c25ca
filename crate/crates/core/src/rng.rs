//! Deterministic random number generation.
//!
//! Every stochastic operation takes an explicit seed and draws from a
//! counter-based generator. Independent noise sources use disjoint streams of
//! the same seed so that adding clutter never perturbs the noise draws and
//! vice versa.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream for additive noise coefficients.
pub const NOISE_STREAM: u64 = 0;
/// Stream for clutter scatterer draws.
pub const CLUTTER_STREAM: u64 = 1;
/// Stream for index-set, schedule and geometry draws.
pub const SCHEME_STREAM: u64 = 2;
/// Stream for synthetic signal content (spectra, scene draws in tests).
pub const CONTENT_STREAM: u64 = 3;

/// Seeded generator on the given stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly symmetric complex Gaussian with E[|z|^2] = `variance`.
pub fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}
