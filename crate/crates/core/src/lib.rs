//! Sub-Nyquist radar simulation and recovery toolkit.
//!
//! The library covers the full chain from scene synthesis to sparse recovery:
//! Fourier-coefficient acquisition on reduced index sets, Doppler focusing
//! with GLRT-gated matching pursuit, clutter whitening, reduced time-on-target
//! schedules, spectral coexistence (MWC sensing, band selection, bound
//! evaluation), collocated MIMO with thinned arrays, and a range-Doppler SAR
//! pipeline with Fourier-domain range cell migration correction.

pub mod clutter;
pub mod error;
pub mod fft;
pub mod focusing;
pub mod io;
pub mod pursuit;
pub mod rng;
pub mod rtot;
pub mod sar;
pub mod scene;
pub mod specx;
pub mod stats;
pub mod summer;
pub mod xampling;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Speed of light in m/s, used to convert delays to ranges.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
