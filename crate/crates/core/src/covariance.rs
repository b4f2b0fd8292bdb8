//! Long-run (HAC) covariance estimation and the two sandwich covariance
//! estimators compared by the Hausman statistic.
//!
//! The long-run estimator is the Bartlett-kernel (Newey–West) form
//!
//! ```text
//! S = G_0 + sum_{l=1..L} (1 - l/(L+1)) (G_l + G_l'),
//! G_l = (1/T) sum_{t=l+1..T} s_t s_{t-l}',
//! ```
//!
//! computed about zero: the score rows fed in are already products, and OLS
//! scores sum to zero by the normal equations, so no demeaning is applied.
//! Everything is normalized by `1/T` with no small-sample correction.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::regression::{spd_inverse, spd_solve};

/// HAC kernel family. Only Bartlett is supported; its weights guarantee a
/// positive semidefinite estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Bartlett,
}

/// Kernel and lag-count options for the long-run covariance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HacOptions {
    pub kernel: Kernel,
    /// Number of lagged autocovariances `L`; must satisfy `L < T`.
    pub bandwidth: usize,
}

impl HacOptions {
    pub fn bartlett(bandwidth: usize) -> Self {
        Self { kernel: Kernel::Bartlett, bandwidth }
    }

    /// Bartlett kernel with the standard deterministic lag rule for sample
    /// size `t`.
    pub fn default_for(t: usize) -> Self {
        Self::bartlett(newey_west_bandwidth(t))
    }
}

/// The standard deterministic lag rule `floor(4 (T/100)^(2/9))`.
pub fn newey_west_bandwidth(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Bartlett-weighted long-run covariance of the rows of `scores` (T×k),
/// computed about zero.
pub fn hac_long_run_cov(scores: ArrayView2<f64>, opts: &HacOptions) -> Result<Array2<f64>> {
    let t = scores.nrows();
    let l_max = opts.bandwidth;
    if l_max >= t {
        return Err(Error::BandwidthTooLarge { bandwidth: l_max, len: t });
    }
    let tf = t as f64;
    let mut cov = scores.t().dot(&scores) / tf;
    for lag in 1..=l_max {
        let weight = 1.0 - lag as f64 / (l_max as f64 + 1.0);
        let lead = scores.slice(ndarray::s![lag.., ..]);
        let trail = scores.slice(ndarray::s![..t - lag, ..]);
        let gamma = lead.t().dot(&trail) / tf;
        cov = cov + weight * (&gamma + &gamma.t());
    }
    // Exact symmetry despite dot-product rounding.
    let sym = (&cov + &cov.t()) / 2.0;
    Ok(sym)
}

/// Sample moment estimates feeding the 2SLS sandwich: `q_xx = X^A'X^A/T`,
/// `q_zz = Z'Z/T`, `q_xz = X^A'Z/T`, plus HAC long-run covariances of the
/// null-fit score rows `x_t^A u_t` and `z_t u_t`.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    pub q_xx: Array2<f64>,
    pub q_zz: Array2<f64>,
    pub q_xz: Array2<f64>,
    pub omega_hat: Array2<f64>,
    pub sigma_zu_hat: Array2<f64>,
}

fn score_rows(design: ArrayView2<f64>, residuals: ArrayView1<f64>) -> Array2<f64> {
    let mut scores = design.to_owned();
    for (mut row, u) in scores.rows_mut().into_iter().zip(residuals.iter()) {
        row.mapv_inplace(|v| v * u);
    }
    scores
}

impl MomentEstimates {
    pub fn estimate(
        x_a_design: ArrayView2<f64>,
        z: ArrayView2<f64>,
        residuals: ArrayView1<f64>,
        opts: &HacOptions,
    ) -> Result<Self> {
        let t = x_a_design.nrows();
        if z.nrows() != t || residuals.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "moment inputs disagree on T: {} vs {} vs {}",
                t,
                z.nrows(),
                residuals.len()
            )));
        }
        let tf = t as f64;
        Ok(Self {
            q_xx: x_a_design.t().dot(&x_a_design) / tf,
            q_zz: z.t().dot(&z) / tf,
            q_xz: x_a_design.t().dot(&z) / tf,
            omega_hat: hac_long_run_cov(score_rows(x_a_design, residuals).view(), opts)?,
            sigma_zu_hat: hac_long_run_cov(score_rows(z, residuals).view(), opts)?,
        })
    }
}

/// Sandwich covariance of the null least-squares estimator:
/// `Q_XX^-1 Omega Q_XX^-1` with `Omega` the HAC long-run covariance of the
/// score rows `x_t^A u_t`.
pub fn null_ls_cov(
    x_a_design: ArrayView2<f64>,
    residuals: ArrayView1<f64>,
    opts: &HacOptions,
) -> Result<Array2<f64>> {
    if residuals.len() != x_a_design.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "residual length {} vs T={}",
            residuals.len(),
            x_a_design.nrows()
        )));
    }
    let tf = x_a_design.nrows() as f64;
    let q = x_a_design.t().dot(&x_a_design) / tf;
    let omega = hac_long_run_cov(score_rows(x_a_design, residuals).view(), opts)?;
    let q_inv = spd_inverse(&q)?;
    let v = q_inv.dot(&omega).dot(&q_inv);
    Ok((&v + &v.t()) / 2.0)
}

/// Three-factor sandwich covariance of the 2SLS estimator:
/// `B (Q_XZ Q_ZZ^-1 Sigma_Zu Q_ZZ^-1 Q_XZ') B` with
/// `B = (Q_XZ Q_ZZ^-1 Q_XZ')^-1`.
pub fn tsls_cov(moments: &MomentEstimates) -> Result<Array2<f64>> {
    // Q_ZZ^-1 Q_XZ' solved rather than inverted.
    let qzz_inv_qzx = spd_solve(&moments.q_zz, &moments.q_xz.t().to_owned())?;
    let bread_inv = moments.q_xz.dot(&qzz_inv_qzx);
    let bread = spd_inverse(&bread_inv)?;
    let middle = qzz_inv_qzx.t().dot(&moments.sigma_zu_hat).dot(&qzz_inv_qzx);
    let v = bread.dot(&middle).dot(&bread);
    Ok((&v + &v.t()) / 2.0)
}
