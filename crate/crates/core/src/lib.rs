//! Specification tests for choosing between fixed-weight time averaging and
//! MIDAS aggregation in mixed-frequency regression.
//!
//! A low-frequency response `y_t` is modelled on a weighted aggregate of m
//! high-frequency observations per period. Under the null the weights are a
//! known fixed vector (flat or end-of-period); under the alternative they
//! follow a one-parameter MIDAS family. The crate provides:
//!
//! - [`regression`]: dense OLS, projections, and partialled coefficients;
//! - [`weights`]: the null, alternative, and instrument weight families,
//!   plus the mixed-frequency sample container;
//! - [`covariance`]: Bartlett-kernel long-run covariance and the sandwich
//!   covariances of the null-LS and 2SLS estimators;
//! - [`spec_tests`]: the instrumented DWH t test, its two-high-frequency-lag
//!   variant, the variable-addition Wald test, and the Hausman chi-square
//!   statistic;
//! - [`dgp`]: seeded AR(1)-chain data generation;
//! - [`mc`]: parallel rejection-rate grids and table rendering;
//! - [`oracle`]: closed-form and Monte Carlo evaluation of the instrument
//!   validity moment, which decays like 1/m.

pub mod covariance;
pub mod dgp;
pub mod error;
pub mod mc;
pub mod oracle;
pub mod regression;
pub mod weights;

pub use error::{Error, Result};
