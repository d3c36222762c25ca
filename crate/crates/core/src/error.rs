//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration or argument validation failure.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Spectrum magnitude fell below the division floor during focusing.
    #[error("spectrum magnitude {magnitude:.3e} below floor {floor:.3e} at bin {bin}")]
    SpectrumBelowFloor {
        bin: usize,
        magnitude: f64,
        floor: f64,
    },

    /// A pursuit re-selected an atom already in the support; the residual
    /// update failed to remove it, so continuing would loop forever.
    #[error("pursuit re-selected atom ({first}, {second}) at iteration {iteration}")]
    RepeatedSelection {
        iteration: usize,
        first: usize,
        second: usize,
    },

    /// Least-squares subproblem is numerically singular.
    #[error("singular least-squares subproblem: {0}")]
    SingularSystem(String),

    /// Covariance passed to whitening is not positive definite.
    #[error("covariance not positive definite: min eigenvalue {0:.3e}")]
    NotPositiveDefinite(f64),

    /// No usable content in the input (empty frame, empty band list, ...).
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A greedy search stopped making progress before reaching its target
    /// residual.
    #[error("residual stalled: {0}")]
    ResidualStalled(String),

    /// Combinatorial budget exceeded.
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("container format: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
