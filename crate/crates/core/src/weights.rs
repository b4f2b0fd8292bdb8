//! Aggregation weights and the mixed-frequency sample container.
//!
//! Four weight families are built here:
//! - flat null weights `(1/m, ..., 1/m)`,
//! - end-of-period null weights with `n < m` positive leading values,
//! - MIDAS alternative weights `w_j ∝ (2 - j/m)^(4 theta)`,
//! - the two instrument weight sequences: geometric `0.9^(j-1)` and linear
//!   `m+1-j`, each normalized to sum to one.
//!
//! Column convention: everything indexes high-frequency lags
//! most-recent-first, i.e. column 1 of `x_high` holds the observation at the
//! end of the period. All consumers rely on this single convention.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// An m-vector of nonnegative aggregation weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Array1<f64>,
}

impl WeightVector {
    /// Validates nonnegativity and unit sum.
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("weight vector must be nonempty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum = weights.sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }
}

/// Flat aggregation: every element `1/m`.
pub fn flat_weights(m: usize) -> Result<WeightVector> {
    if m == 0 {
        return Err(Error::InvalidParameter("frequency ratio m must be >= 1".into()));
    }
    let w = 1.0 / m as f64;
    // Renormalize the last element so the sum is exactly representable.
    let mut weights = Array1::from_elem(m, w);
    let correction = 1.0 - weights.sum();
    weights[m - 1] += correction;
    WeightVector::new(weights)
}

/// End-of-period aggregation: the first `n = leading_values.len()` weights
/// are the given positive values summing to one, the remaining `m - n` are
/// exactly zero.
pub fn end_of_period_weights(m: usize, leading_values: &[f64]) -> Result<WeightVector> {
    let n = leading_values.len();
    if n == 0 || n >= m {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n < m, got n={n}, m={m}"
        )));
    }
    if leading_values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "leading values must be positive and finite".into(),
        ));
    }
    let sum: f64 = leading_values.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "leading values must sum to 1, got {sum}"
        )));
    }
    let mut weights = Array1::zeros(m);
    for (i, v) in leading_values.iter().enumerate() {
        weights[i] = v / sum;
    }
    WeightVector::new(weights)
}

/// MIDAS weights `w_j = (2 - j/m)^(4 theta) / sum_i (2 - i/m)^(4 theta)`
/// for `j = 1..=m`. At `theta = 0` this reduces to the flat weights; the
/// base lies in `[1, 2)` so any finite `theta`, including negative values,
/// yields positive weights.
pub fn midas_weights(theta: f64, m: usize) -> Result<WeightVector> {
    if m == 0 {
        return Err(Error::InvalidParameter("frequency ratio m must be >= 1".into()));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParameter("theta must be finite".into()));
    }
    let mf = m as f64;
    let raw = Array1::from_shape_fn(m, |j0| {
        let j = (j0 + 1) as f64;
        (2.0 - j / mf).powf(4.0 * theta)
    });
    let sum = raw.sum();
    WeightVector::new(raw.mapv(|v| v / sum))
}

/// The two instrument weight sequences: geometric `f1(j) = 0.9^(j-1)` and
/// linear `f2(j) = m + 1 - j`, each normalized. Both are strictly
/// decreasing for `m >= 2` and linearly independent.
pub fn instrument_weights(m: usize) -> Result<(WeightVector, WeightVector)> {
    if m == 0 {
        return Err(Error::InvalidParameter("frequency ratio m must be >= 1".into()));
    }
    let geo_raw = Array1::from_shape_fn(m, |j0| 0.9f64.powi(j0 as i32));
    let geo_sum = geo_raw.sum();
    let lin_raw = Array1::from_shape_fn(m, |j0| (m - j0) as f64);
    let lin_sum = lin_raw.sum();
    Ok((
        WeightVector::new(geo_raw.mapv(|v| v / geo_sum))?,
        WeightVector::new(lin_raw.mapv(|v| v / lin_sum))?,
    ))
}

/// A low-frequency response paired with its T×m high-frequency regressor
/// block, columns ordered most-recent-first.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    y: Array1<f64>,
    x_high: Array2<f64>,
}

impl MixedSample {
    pub fn new(y: Array1<f64>, x_high: Array2<f64>) -> Result<Self> {
        if x_high.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "x_high has {} rows but y has {} elements",
                x_high.nrows(),
                y.len()
            )));
        }
        if x_high.ncols() == 0 || y.is_empty() {
            return Err(Error::InvalidParameter("sample must be nonempty".into()));
        }
        Ok(Self { y, x_high })
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn x_high(&self) -> ArrayView2<'_, f64> {
        self.x_high.view()
    }

    /// Frequency ratio: high-frequency observations per low-frequency period.
    pub fn m(&self) -> usize {
        self.x_high.ncols()
    }

    /// Low-frequency sample size.
    pub fn t(&self) -> usize {
        self.y.len()
    }
}

/// Aggregates each high-frequency row by the weight vector:
/// element t is `x_high.row(t) · w`.
pub fn aggregate(sample: &MixedSample, w: &WeightVector) -> Result<Array1<f64>> {
    if w.m() != sample.m() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs frequency ratio {}",
            w.m(),
            sample.m()
        )));
    }
    Ok(sample.x_high().dot(&w.weights()))
}

/// Builds the T×2 instrument matrix whose columns aggregate the sample by
/// the geometric and linear instrument weights. Requires `m >= 2`; at
/// `m = 1` the two instruments coincide and carry no identifying variation.
pub fn build_instruments(sample: &MixedSample) -> Result<Array2<f64>> {
    if sample.m() < 2 {
        return Err(Error::DegenerateInstruments(
            "m = 1: the two instrument weight sequences coincide".into(),
        ));
    }
    let (u1, u2) = instrument_weights(sample.m())?;
    let z1 = aggregate(sample, &u1)?;
    let z2 = aggregate(sample, &u2)?;
    let mut z = Array2::zeros((sample.t(), 2));
    z.column_mut(0).assign(&z1);
    z.column_mut(1).assign(&z2);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn flat_weights_quarter_each() {
        let w = flat_weights(4).unwrap();
        for v in w.weights().iter() {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn flat_weights_degenerate_and_large() {
        assert_abs_diff_eq!(flat_weights(1).unwrap().weights()[0], 1.0, epsilon = 0.0);
        let w = flat_weights(150).unwrap();
        assert_abs_diff_eq!(w.weights().sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.weights()[42], 1.0 / 150.0, epsilon = 1e-15);
        assert!(matches!(flat_weights(0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn end_of_period_examples() {
        let w = end_of_period_weights(4, &[1.0]).unwrap();
        assert_eq!(w.weights().to_vec(), vec![1.0, 0.0, 0.0, 0.0]);

        let w = end_of_period_weights(5, &[0.6, 0.4]).unwrap();
        assert_abs_diff_eq!(w.weights()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights()[1], 0.4, epsilon = 1e-15);
        assert_eq!(w.weights()[2], 0.0);
        assert_eq!(w.weights()[4], 0.0);
    }

    #[test]
    fn end_of_period_rejects_bad_inputs() {
        assert!(matches!(
            end_of_period_weights(3, &[0.5, 0.6]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            end_of_period_weights(3, &[1.0, -0.0001, 0.0001]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            end_of_period_weights(2, &[0.5, 0.5]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn midas_at_zero_is_flat() {
        for m in [1usize, 4, 37, 150] {
            let mw = midas_weights(0.0, m).unwrap();
            let fw = flat_weights(m).unwrap();
            for (a, b) in mw.weights().iter().zip(fw.weights().iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn midas_half_theta_m4_closed_form() {
        // (2 - j/4)^2 / 7.875 evaluated by hand.
        let w = midas_weights(0.5, 4).unwrap();
        let expected = [
            0.3888888888888889,
            0.2857142857142857,
            0.1984126984126984,
            0.12698412698412698,
        ];
        for (a, b) in w.weights().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn midas_large_theta_concentrates_on_most_recent() {
        let w = midas_weights(10.0, 4).unwrap();
        assert!(w.weights()[0] > 0.9);
        for j in 1..4 {
            assert!(w.weights()[j] < w.weights()[j - 1]);
        }
        assert_abs_diff_eq!(w.weights()[0], 0.9979034156145358, epsilon = 1e-12);
    }

    #[test]
    fn midas_negative_theta_still_valid() {
        let w = midas_weights(-1.5, 6).unwrap();
        assert!(w.weights().iter().all(|v| *v > 0.0));
        assert_abs_diff_eq!(w.weights().sum(), 1.0, epsilon = 1e-12);
        // Increasing in j: the largest base gets the most negative exponent.
        for j in 1..6 {
            assert!(w.weights()[j] > w.weights()[j - 1]);
        }
    }

    #[test]
    fn instrument_weights_m4_closed_forms() {
        let (u1, u2) = instrument_weights(4).unwrap();
        let expected_lin = [0.4, 0.3, 0.2, 0.1];
        for (a, b) in u2.weights().iter().zip(expected_lin.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        // 0.9^(j-1) / 3.439 evaluated by hand.
        let expected_geo = [
            0.29078220412910727,
            0.2617039837161966,
            0.2355335853445769,
            0.21198022681011924,
        ];
        for (a, b) in u1.weights().iter().zip(expected_geo.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn instrument_weights_m1_both_unit() {
        let (u1, u2) = instrument_weights(1).unwrap();
        assert_eq!(u1.weights()[0], 1.0);
        assert_eq!(u2.weights()[0], 1.0);
    }

    #[test]
    fn instrument_weights_decreasing_and_independent() {
        for m in [2usize, 3, 4, 8, 16, 150, 365] {
            let (u1, u2) = instrument_weights(m).unwrap();
            for j in 1..m {
                assert!(u1.weights()[j] < u1.weights()[j - 1]);
                assert!(u2.weights()[j] < u2.weights()[j - 1]);
            }
            let a = u1.weights().dot(&u1.weights());
            let b = u1.weights().dot(&u2.weights());
            let c = u2.weights().dot(&u2.weights());
            assert!(a * c - b * b > 0.0, "m={m}: Gram determinant not positive");
        }
    }

    #[test]
    fn aggregate_examples() {
        let sample = MixedSample::new(
            array![0.0],
            array![[1.0, 2.0, 3.0, 4.0]],
        )
        .unwrap();
        let flat = aggregate(&sample, &flat_weights(4).unwrap()).unwrap();
        assert_abs_diff_eq!(flat[0], 2.5, epsilon = 1e-15);

        let eop = aggregate(&sample, &end_of_period_weights(4, &[1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(eop[0], 1.0, epsilon = 1e-15);

        let (_, u2) = instrument_weights(4).unwrap();
        let lin = aggregate(&sample, &u2).unwrap();
        assert_abs_diff_eq!(lin[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn aggregate_checks_dimensions() {
        let sample = MixedSample::new(array![0.0], array![[1.0, 2.0]]).unwrap();
        assert!(matches!(
            aggregate(&sample, &flat_weights(3).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mixed_sample_row_count_must_match() {
        assert!(matches!(
            MixedSample::new(array![1.0, 2.0], array![[1.0, 2.0]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn instruments_match_per_row_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = ndarray::Array2::from_shape_fn((10, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::zeros(10);
        let sample = MixedSample::new(y, x.clone()).unwrap();
        let z = build_instruments(&sample).unwrap();
        let (u1, u2) = instrument_weights(4).unwrap();
        // Brute-force oracle: scalar dot products row by row.
        for t in 0..10 {
            let mut z1 = 0.0;
            let mut z2 = 0.0;
            for j in 0..4 {
                z1 += x[(t, j)] * u1.weights()[j];
                z2 += x[(t, j)] * u2.weights()[j];
            }
            assert_abs_diff_eq!(z[(t, 0)], z1, epsilon = 1e-12);
            assert_abs_diff_eq!(z[(t, 1)], z2, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_rows_give_constant_instruments() {
        let x = ndarray::Array2::from_elem((6, 5), 3.25);
        let sample = MixedSample::new(Array1::zeros(6), x).unwrap();
        let z = build_instruments(&sample).unwrap();
        for v in z.iter() {
            assert_abs_diff_eq!(*v, 3.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn instruments_degenerate_at_m1() {
        let sample = MixedSample::new(array![1.0, 2.0], array![[1.0], [2.0]]).unwrap();
        assert!(matches!(
            build_instruments(&sample),
            Err(Error::DegenerateInstruments(_))
        ));
    }

    proptest! {
        #[test]
        fn constructors_satisfy_weight_invariants(theta in -3.0f64..3.0, m in 1usize..200) {
            for w in [midas_weights(theta, m).unwrap(), flat_weights(m).unwrap()] {
                prop_assert!(w.weights().iter().all(|v| *v >= 0.0));
                prop_assert!((w.weights().sum() - 1.0).abs() <= 1e-12);
            }
            if m >= 2 {
                let (u1, u2) = instrument_weights(m).unwrap();
                prop_assert!((u1.weights().sum() - 1.0).abs() <= 1e-12);
                prop_assert!((u2.weights().sum() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn aggregate_linear_in_weights(seed in 0u64..1_000, alpha in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 6;
            let x = ndarray::Array2::from_shape_fn((8, m), |_| rng.sample::<f64, _>(StandardNormal));
            let sample = MixedSample::new(Array1::zeros(8), x).unwrap();
            let w1 = flat_weights(m).unwrap();
            let w2 = midas_weights(1.0, m).unwrap();
            let blend_raw: Array1<f64> = alpha * &w1.weights() + (1.0 - alpha) * &w2.weights();
            let mut blend_arr = blend_raw.clone();
            let corr = 1.0 - blend_arr.sum();
            blend_arr[m - 1] += corr;
            let blend = WeightVector::new(blend_arr).unwrap();
            let lhs = aggregate(&sample, &blend).unwrap();
            let a1 = aggregate(&sample, &w1).unwrap();
            let a2 = aggregate(&sample, &w2).unwrap();
            for t in 0..8 {
                let rhs = alpha * a1[t] + (1.0 - alpha) * a2[t];
                prop_assert!((lhs[t] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
