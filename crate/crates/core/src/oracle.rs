//! Closed-form evaluation of the population instrument-error moment
//! `E(z_{r,t} u_t^A)` and of the population null-regression coefficients,
//! plus a brute-force Monte Carlo counterpart used to cross-check both.
//!
//! The high-frequency regressor block has the Toeplitz covariance
//! `Phi[i,j] = d^{|i-j|} sigma_x^2` (`d = 0` is the i.i.d. case). With a
//! zero-mean regressor the moment reduces to
//!
//! ```text
//! E(z_r u^A) = beta1 * Upsilon_r' (Phi pi(theta)
//!              - (pi0' Phi pi(theta)) / (pi0' Phi pi0) * Phi pi0)
//! ```
//!
//! which decays like 1/m: the instruments are only asymptotically valid in
//! the frequency ratio.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::dgp::{derive_replication_seed, simulate, DgpSpec};
use crate::error::{Error, Result};
use crate::weights::{aggregate, WeightVector};

/// Stationary second-moment description of the high-frequency regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorCovariance {
    /// AR(1) parameter; 0 for the i.i.d. case.
    pub d: f64,
    /// Marginal variance of each high-frequency observation.
    pub sigma_x_sq: f64,
    /// Frequency ratio (matrix dimension).
    pub m: usize,
}

impl RegressorCovariance {
    fn validate(&self) -> Result<()> {
        if !(self.d.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|d| < 1 required, got {}", self.d)));
        }
        if !(self.sigma_x_sq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_x_sq must be positive, got {}",
                self.sigma_x_sq
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        Ok(())
    }

    /// The covariance description implied by a simulation spec: unit
    /// innovations give marginal variance `1/(1-d^2)`.
    pub fn from_dgp(spec: &DgpSpec) -> Self {
        Self { d: spec.d, sigma_x_sq: 1.0 / (1.0 - spec.d * spec.d), m: spec.m }
    }
}

/// The m×m Toeplitz matrix `d^{|i-j|} sigma_x^2`.
pub fn phi_matrix(cov: &RegressorCovariance) -> Array2<f64> {
    let powers: Vec<f64> = (0..cov.m)
        .map(|k| if k == 0 { 1.0 } else { cov.d.powi(k as i32) })
        .collect();
    Array2::from_shape_fn((cov.m, cov.m), |(i, j)| {
        cov.sigma_x_sq * powers[i.abs_diff(j)]
    })
}

fn check_dims(pi0: &WeightVector, upsilon_r: &WeightVector, m: usize) -> Result<()> {
    if pi0.m() != m || upsilon_r.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "weight lengths {} and {} vs m={m}",
            pi0.m(),
            upsilon_r.m()
        )));
    }
    Ok(())
}

/// General-form population moment `E(z_{r,t} u_t^A)`.
pub fn expected_instrument_score(
    beta1: f64,
    theta: f64,
    pi0: &WeightVector,
    upsilon_r: &WeightVector,
    cov: &RegressorCovariance,
) -> Result<f64> {
    cov.validate()?;
    check_dims(pi0, upsilon_r, cov.m)?;
    let phi = phi_matrix(cov);
    let pi_theta = crate::weights::midas_weights(theta, cov.m)?;
    let phi_pi_theta = phi.dot(&pi_theta.weights());
    let phi_pi0 = phi.dot(&pi0.weights());
    let denom = pi0.weights().dot(&phi_pi0);
    if !(denom > 1e-12 * cov.sigma_x_sq) {
        return Err(Error::DegenerateNull(format!(
            "pi0' Phi pi0 = {denom} is not positive"
        )));
    }
    let ratio = pi0.weights().dot(&phi_pi_theta) / denom;
    let core: Array1<f64> = &phi_pi_theta - &(ratio * &phi_pi0);
    Ok(beta1 * upsilon_r.weights().dot(&core))
}

/// Specialization of the moment to the i.i.d. regressor (`Phi` diagonal):
/// `beta1 sigma^2 Upsilon_r'(pi(theta) - (pi0'pi(theta))/(pi0'pi0) pi0)`.
/// Must agree with the general form at `d = 0`.
pub fn expected_instrument_score_iid(
    beta1: f64,
    theta: f64,
    pi0: &WeightVector,
    upsilon_r: &WeightVector,
    sigma_x_sq: f64,
) -> Result<f64> {
    if !(sigma_x_sq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_x_sq must be positive, got {sigma_x_sq}"
        )));
    }
    let m = pi0.m();
    check_dims(pi0, upsilon_r, m)?;
    let pi_theta = crate::weights::midas_weights(theta, m)?;
    let denom = pi0.weights().dot(&pi0.weights());
    if !(denom > 0.0) {
        return Err(Error::DegenerateNull("pi0'pi0 is not positive".into()));
    }
    let ratio = pi0.weights().dot(&pi_theta.weights()) / denom;
    let core: Array1<f64> = &pi_theta.weights().to_owned() - &(ratio * &pi0.weights().to_owned());
    Ok(beta1 * sigma_x_sq * upsilon_r.weights().dot(&core))
}

/// Population coefficients of the null regression of the aggregated model:
/// the intercept passes through and the slope shrinks by
/// `pi0' Phi pi(theta) / pi0' Phi pi0`.
pub fn population_null_coefficients(
    beta0: f64,
    beta1: f64,
    theta: f64,
    pi0: &WeightVector,
    cov: &RegressorCovariance,
) -> Result<[f64; 2]> {
    cov.validate()?;
    if pi0.m() != cov.m {
        return Err(Error::DimensionMismatch(format!(
            "pi0 length {} vs m={}",
            pi0.m(),
            cov.m
        )));
    }
    let phi = phi_matrix(cov);
    let pi_theta = crate::weights::midas_weights(theta, cov.m)?;
    // Second-moment blocks with a zero-mean regressor.
    let q_aa = pi0.weights().dot(&phi.dot(&pi0.weights()));
    let q_at = pi0.weights().dot(&phi.dot(&pi_theta.weights()));
    if !(q_aa > 1e-12 * cov.sigma_x_sq) {
        return Err(Error::DegenerateNull(format!("pi0' Phi pi0 = {q_aa} is not positive")));
    }
    // [[1, 0], [0, q_aa]]^-1 [[1, 0], [0, q_at]] beta.
    Ok([beta0, beta1 * q_at / q_aa])
}

const ORACLE_CELL_ID: u64 = 0x6f72_6163_6c65;

/// Brute-force counterpart of [`expected_instrument_score`]: simulates,
/// forms the population-coefficient residual `u^A`, and averages
/// `z_{r,t} u_t^A`. Returns the mean across replications and its standard
/// error.
pub fn monte_carlo_instrument_score(
    spec: &DgpSpec,
    pi0: &WeightVector,
    upsilon_r: &WeightVector,
    replications: usize,
) -> Result<(f64, f64)> {
    if replications < 2 {
        return Err(Error::InvalidParameter("need at least 2 replications".into()));
    }
    let cov = RegressorCovariance::from_dgp(spec);
    check_dims(pi0, upsilon_r, spec.m)?;
    let beta_pop = population_null_coefficients(0.0, spec.beta, spec.theta, pi0, &cov)?;

    let scores: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let rep_spec = DgpSpec {
                seed: derive_replication_seed(spec.seed, ORACLE_CELL_ID, rep),
                ..*spec
            };
            let sample = simulate(&rep_spec)?;
            let x_a = aggregate(&sample, pi0)?;
            let z_r = aggregate(&sample, upsilon_r)?;
            let t = sample.t() as f64;
            let mut acc = 0.0;
            for i in 0..sample.t() {
                let u_a = sample.y()[i] - beta_pop[0] - beta_pop[1] * x_a[i];
                acc += z_r[i] * u_a;
            }
            Ok(acc / t)
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{end_of_period_weights, flat_weights, instrument_weights, midas_weights};
    use approx::assert_abs_diff_eq;

    fn flat_cov(d: f64, m: usize) -> RegressorCovariance {
        RegressorCovariance { d, sigma_x_sq: 1.0, m }
    }

    #[test]
    fn phi_identity_when_iid() {
        let phi = phi_matrix(&flat_cov(0.0, 4));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(phi[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn phi_half_decay_m3() {
        let phi = phi_matrix(&flat_cov(0.5, 3));
        let expected = [
            [1.0, 0.5, 0.25],
            [0.5, 1.0, 0.5],
            [0.25, 0.5, 1.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(phi[(i, j)], expected[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn phi_symmetric() {
        let phi = phi_matrix(&flat_cov(-0.7, 9));
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(phi[(i, j)], phi[(j, i)]);
            }
        }
    }

    #[test]
    fn score_vanishes_at_null() {
        let m = 12;
        let pi0 = flat_weights(m).unwrap();
        let (u1, u2) = instrument_weights(m).unwrap();
        for ups in [&u1, &u2] {
            let v = expected_instrument_score(10.0, 0.0, &pi0, ups, &flat_cov(0.4, m)).unwrap();
            assert!(v.abs() < 1e-14, "score {v} at the null");
        }
    }

    #[test]
    fn iid_and_general_paths_agree_at_d_zero() {
        let m = 8;
        let pi0 = flat_weights(m).unwrap();
        let eop = end_of_period_weights(m, &[0.7, 0.3]).unwrap();
        let (u1, u2) = instrument_weights(m).unwrap();
        for null in [&pi0, &eop] {
            for ups in [&u1, &u2] {
                for theta in [0.3, 1.0, 2.0] {
                    let general =
                        expected_instrument_score(10.0, theta, null, ups, &flat_cov(0.0, m))
                            .unwrap();
                    let iid =
                        expected_instrument_score_iid(10.0, theta, null, ups, 1.0).unwrap();
                    assert_abs_diff_eq!(general, iid, epsilon = 1e-12 * (1.0 + iid.abs()));
                }
            }
        }
    }

    #[test]
    fn frozen_values_m8() {
        // Independently evaluated from the closed form.
        let m = 8;
        let pi0 = flat_weights(m).unwrap();
        let (u1, u2) = instrument_weights(m).unwrap();
        let cov = flat_cov(0.3, m);
        let v1 = expected_instrument_score(10.0, 1.0, &pi0, &u1, &cov).unwrap();
        let v2 = expected_instrument_score(10.0, 1.0, &pi0, &u2, &cov).unwrap();
        assert_abs_diff_eq!(v1, 0.29493886879719466, epsilon = 1e-12);
        assert_abs_diff_eq!(v2, 0.6169190751325088, epsilon = 1e-12);
    }

    #[test]
    fn score_linear_in_slope() {
        let m = 16;
        let pi0 = flat_weights(m).unwrap();
        let (u1, _) = instrument_weights(m).unwrap();
        let cov = flat_cov(0.5, m);
        let v1 = expected_instrument_score(5.0, 0.8, &pi0, &u1, &cov).unwrap();
        let v2 = expected_instrument_score(10.0, 0.8, &pi0, &u1, &cov).unwrap();
        assert_eq!(v2, 2.0 * v1);
    }

    /// First-term bound constant: 2^(4 theta) (1 + |d|) / (1 - |d|).
    fn c1_bound(d: f64, theta: f64) -> f64 {
        2f64.powf(4.0 * theta) * (1.0 + d.abs()) / (1.0 - d.abs())
    }

    #[test]
    fn scaled_score_respects_decay_bounds() {
        // m |E| stays under the closed-form bound constants for the flat
        // null; the bound is C1 plus the flat-null second-term envelope.
        for &(theta, d) in &[(0.5, 0.0), (0.5, 0.5), (1.0, 0.0), (1.0, 0.5)] {
            for &m in &[8usize, 16, 32, 64, 128, 256] {
                let pi0 = flat_weights(m).unwrap();
                let (u1, u2) = instrument_weights(m).unwrap();
                let cov = flat_cov(d, m);
                let second = if d == 0.0 {
                    1.0
                } else {
                    m as f64 * (1.0 + 3.0 * d).powi(2) / (m as f64 * (1.0 - d * d) - 2.0 * d)
                };
                let bound = 10.0 * (c1_bound(d, theta) + second);
                for ups in [&u1, &u2] {
                    let v = expected_instrument_score(10.0, theta, &pi0, ups, &cov).unwrap();
                    let scaled = v.abs() * m as f64;
                    assert!(
                        scaled <= bound,
                        "theta={theta} d={d} m={m}: m|E| = {scaled} > bound {bound}"
                    );
                }
            }
        }
    }

    /// End-of-period second-term ingredients.
    fn d0_d1_d2(pi0: &WeightVector, d: f64, n: usize) -> (f64, f64, f64) {
        let w = pi0.weights();
        let inner = |k: usize| -> f64 {
            let mut s = 0.0;
            for i in k..n {
                s += w[i] * d.powi((i - k) as i32);
            }
            for j in 0..k {
                s += w[j] * d.powi((j + 1) as i32);
            }
            s
        };
        let d0: f64 = (0..n).map(|k| inner(k) * w[k]).sum();
        let d1: f64 = (0..n).map(inner).sum();
        let d2: f64 = (0..n).map(|p| d.powi((n - 1 - p) as i32) * w[p]).sum();
        (d0, d1, d2)
    }

    #[test]
    fn end_of_period_scaled_score_bounded() {
        let leading = [0.7, 0.3];
        let n = leading.len();
        for &(theta, d) in &[(0.5, 0.3), (1.0, 0.5)] {
            for &m in &[16usize, 64, 256] {
                let pi0 = end_of_period_weights(m, &leading).unwrap();
                let (u1, u2) = instrument_weights(m).unwrap();
                let cov = flat_cov(d, m);
                let (d0, d1, d2) = d0_d1_d2(&pi0, d, n);
                let s_pi: f64 = (1..=m)
                    .map(|j| (2.0 - j as f64 / m as f64).powf(4.0 * theta))
                    .sum();
                for ups in [&u1, &u2] {
                    let max_f = ups.weights()[0];
                    let env = d1 + (1.0 - d.powi((m - n + 1) as i32)) / (1.0 - d) * d2;
                    let second = max_f / d0 * 2f64.powf(4.0 * theta) / s_pi * env * env;
                    let bound = 10.0 * (c1_bound(d, theta) + m as f64 * second);
                    let v = expected_instrument_score(10.0, theta, &pi0, ups, &cov).unwrap();
                    assert!(
                        v.abs() * m as f64 <= bound,
                        "eop theta={theta} d={d} m={m}: {} > {bound}",
                        v.abs() * m as f64
                    );
                }
            }
        }
    }

    #[test]
    fn population_coefficients_pass_through_at_null() {
        let m = 10;
        let pi0 = flat_weights(m).unwrap();
        let b = population_null_coefficients(2.0, 10.0, 0.0, &pi0, &flat_cov(0.6, m)).unwrap();
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_null_iid_slope_undistorted() {
        // With flat weights and an i.i.d. regressor, pi0'pi(theta) = 1/m =
        // pi0'pi0, so the population slope equals the true slope.
        let m = 24;
        let pi0 = flat_weights(m).unwrap();
        let b = population_null_coefficients(0.0, 10.0, 1.3, &pi0, &flat_cov(0.0, m)).unwrap();
        assert_abs_diff_eq!(b[1], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn frozen_population_slope_m8() {
        let m = 8;
        let pi0 = flat_weights(m).unwrap();
        let b = population_null_coefficients(2.0, 10.0, 1.0, &pi0, &flat_cov(0.3, m)).unwrap();
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1], 9.839864268148453, epsilon = 1e-12);
    }

    #[test]
    fn null_ls_estimates_converge_to_population_coefficients() {
        use crate::regression::{ols_fit, DesignMatrix};
        let m = 16;
        let pi0 = flat_weights(m).unwrap();
        let spec = DgpSpec {
            t: 2048,
            m,
            c: 0.0,
            d: 0.4,
            beta: 10.0,
            theta: 1.0,
            seed: 77,
            burn_in: 500,
        };
        let pop =
            population_null_coefficients(0.0, spec.beta, spec.theta, &pi0, &RegressorCovariance::from_dgp(&spec))
                .unwrap();
        let reps = 24;
        let mut slopes = Vec::with_capacity(reps);
        let mut intercepts = Vec::with_capacity(reps);
        for rep in 0..reps as u64 {
            let s = simulate(&DgpSpec {
                seed: derive_replication_seed(spec.seed, 5, rep),
                ..spec
            })
            .unwrap();
            let x_a = aggregate(&s, &pi0).unwrap();
            let design = DesignMatrix::from_columns(&[
                ("const", ndarray::Array1::ones(s.t()).view()),
                ("x_a", x_a.view()),
            ])
            .unwrap();
            let fit = ols_fit(&design, s.y()).unwrap();
            intercepts.push(fit.coefficients[0]);
            slopes.push(fit.coefficients[1]);
        }
        for (estimates, target) in [(intercepts, pop[0]), (slopes, pop[1])] {
            let n = estimates.len() as f64;
            let mean = estimates.iter().sum::<f64>() / n;
            let sd = (estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                / (n - 1.0))
                .sqrt();
            let se = sd / n.sqrt();
            assert!(
                (mean - target).abs() <= 3.0 * se,
                "mean {mean} vs population {target} (se {se})"
            );
        }
    }

    #[test]
    fn monte_carlo_and_analytic_oracles_agree() {
        let m = 16;
        let pi0 = flat_weights(m).unwrap();
        let (u1, _) = instrument_weights(m).unwrap();
        let spec = DgpSpec {
            t: 400,
            m,
            c: 0.0,
            d: 0.0,
            beta: 10.0,
            theta: 1.0,
            seed: 88,
            burn_in: 200,
        };
        let analytic =
            expected_instrument_score(10.0, 1.0, &pi0, &u1, &RegressorCovariance::from_dgp(&spec))
                .unwrap();
        let (mean, se) = monte_carlo_instrument_score(&spec, &pi0, &u1, 400).unwrap();
        assert!(
            (mean - analytic).abs() <= 3.0 * se,
            "MC {mean} vs analytic {analytic} (se {se})"
        );
    }

    #[test]
    fn monte_carlo_score_centers_on_zero_at_null() {
        let m = 8;
        let pi0 = flat_weights(m).unwrap();
        let (_, u2) = instrument_weights(m).unwrap();
        let spec = DgpSpec {
            t: 300,
            m,
            c: 0.2,
            d: 0.3,
            beta: 10.0,
            theta: 0.0,
            seed: 89,
            burn_in: 200,
        };
        let (mean, se) = monte_carlo_instrument_score(&spec, &pi0, &u2, 300).unwrap();
        assert!(mean.abs() <= 3.0 * se, "null score {mean} (se {se})");
    }

    #[test]
    fn standard_error_shrinks_with_replications() {
        let m = 8;
        let pi0 = flat_weights(m).unwrap();
        let (u1, _) = instrument_weights(m).unwrap();
        let spec = DgpSpec {
            t: 120,
            m,
            c: 0.0,
            d: 0.0,
            beta: 10.0,
            theta: 0.5,
            seed: 90,
            burn_in: 100,
        };
        let (_, se_small) = monte_carlo_instrument_score(&spec, &pi0, &u1, 200).unwrap();
        let (_, se_large) = monte_carlo_instrument_score(&spec, &pi0, &u1, 800).unwrap();
        let ratio = se_small / se_large;
        assert!(
            (1.6..=2.6).contains(&ratio),
            "quadrupling replications changed se by factor {ratio}"
        );
    }
}
