//! Error type shared across the library.

use thiserror::Error;

/// Errors surfaced by estimation, weighting, simulation and testing routines.
///
/// Near-singular designs are reported, never silently regularized: a test
/// that runs on collinear instruments would produce a meaningless statistic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A design (or Gram/moment) matrix is singular beyond the rank tolerance.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The instrument set carries no usable identifying variation
    /// (m = 1, or the two weight sequences are numerically collinear).
    #[error("degenerate instruments: {0}")]
    DegenerateInstruments(String),

    /// HAC bandwidth is not smaller than the series length.
    #[error("bandwidth {bandwidth} too large for series of length {len}")]
    BandwidthTooLarge { bandwidth: usize, len: usize },

    /// The null-weight quadratic form pi0' Phi pi0 is not positive.
    #[error("degenerate null weights: {0}")]
    DegenerateNull(String),
}

pub type Result<T> = std::result::Result<T, Error>;
