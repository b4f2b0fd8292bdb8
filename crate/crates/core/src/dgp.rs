//! Synthetic mixed-frequency data generation.
//!
//! Both the regressor and the error evolve as one continuous high-frequency
//! AR(1) chain of length `burn_in + T*m` with standard normal innovations:
//! the oldest element of block t follows the newest element of block t-1.
//! After discarding the burn-in, the chain is reshaped into T rows of m
//! columns ordered most-recent-first. The latent high-frequency response is
//! `y_hf = x * beta + u` (no intercept), and the observed low-frequency
//! response aggregates each y block with the MIDAS weights at `theta`
//! (flat at `theta = 0`).
//!
//! Everything is deterministic given the seed; replications inside a grid
//! derive their own seeds so results never depend on scheduling.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::weights::{midas_weights, MixedSample};

/// Parameters of one simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    /// Low-frequency sample size.
    pub t: usize,
    /// Frequency ratio.
    pub m: usize,
    /// AR(1) parameter of the high-frequency error chain, |c| < 1.
    pub c: f64,
    /// AR(1) parameter of the high-frequency regressor chain, |d| < 1.
    pub d: f64,
    /// Slope on the high-frequency regressor.
    pub beta: f64,
    /// MIDAS aggregation parameter; 0 is the flat null.
    pub theta: f64,
    pub seed: u64,
    /// High-frequency presample length discarded before reshaping.
    pub burn_in: usize,
}

impl DgpSpec {
    pub const DEFAULT_BETA: f64 = 10.0;
    pub const DEFAULT_BURN_IN: usize = 1000;

    fn validate(&self) -> Result<()> {
        if self.t == 0 || self.m == 0 {
            return Err(Error::InvalidParameter(format!(
                "need T >= 1 and m >= 1, got T={}, m={}",
                self.t, self.m
            )));
        }
        if !(self.c.abs() < 1.0) || !(self.d.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "AR parameters must satisfy |c| < 1 and |d| < 1, got c={}, d={}",
                self.c, self.d
            )));
        }
        if !self.beta.is_finite() || !self.theta.is_finite() {
            return Err(Error::InvalidParameter("beta and theta must be finite".into()));
        }
        Ok(())
    }
}

/// A simulated sample with the latent error block kept for diagnostics.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub sample: MixedSample,
    /// T×m block of the high-frequency errors, most-recent-first.
    pub u_high: Array2<f64>,
}

fn ar1_chain(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> Vec<f64> {
    let mut chain = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        prev = rho * prev + rng.sample::<f64, _>(StandardNormal);
        chain.push(prev);
    }
    chain
}

/// Reshapes a chronological chain (burn-in already skipped) into T rows of
/// m columns most-recent-first.
fn into_blocks(chain: &[f64], t: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, m), |(row, col)| chain[(row + 1) * m - 1 - col])
}

/// Generates one dataset and also returns the latent error block.
pub fn simulate_with_errors(spec: &DgpSpec) -> Result<SimulatedSample> {
    spec.validate()?;
    let n = spec.burn_in + spec.t * spec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u_chain = ar1_chain(&mut rng, n, spec.c);
    let x_chain = ar1_chain(&mut rng, n, spec.d);

    let u_high = into_blocks(&u_chain[spec.burn_in..], spec.t, spec.m);
    let x_high = into_blocks(&x_chain[spec.burn_in..], spec.t, spec.m);

    let pi = midas_weights(spec.theta, spec.m)?;
    let y_high = spec.beta * &x_high + &u_high;
    let y: Array1<f64> = y_high.dot(&pi.weights());

    Ok(SimulatedSample { sample: MixedSample::new(y, x_high)?, u_high })
}

/// Generates one dataset per the AR(1)-chain design above.
pub fn simulate(spec: &DgpSpec) -> Result<MixedSample> {
    Ok(simulate_with_errors(spec)?.sample)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic avalanche mixing of (base seed, cell, replication) into a
/// per-replication seed, so parallel replications are independent of
/// scheduling order.
pub fn derive_replication_seed(base_seed: u64, cell_id: u64, replication_index: u64) -> u64 {
    let mut state = base_seed;
    let a = splitmix64(&mut state);
    state = a ^ cell_id;
    let b = splitmix64(&mut state);
    state = b ^ replication_index;
    splitmix64(&mut state)
}
