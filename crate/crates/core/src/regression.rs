//! Dense ordinary-least-squares machinery: fits, projections, annihilators,
//! and Frisch–Waugh–Lovell partialled coefficients.
//!
//! All solves go through a Cholesky factorization of the p×p Gram matrix
//! `D'D` with a relative rank tolerance; projections are computed as fitted
//! values of a least-squares solve, never by forming T×T projector matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative pivot tolerance for declaring a Gram matrix rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A T×p regression design with labelled columns.
///
/// Invariants: `T >= p >= 1`; full column rank is required by the solve
/// operations and is reported as [`Error::RankDeficient`] when violated.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    values: Array2<f64>,
    column_labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: Array2<f64>, column_labels: Vec<String>) -> Result<Self> {
        let (t, p) = values.dim();
        if p < 1 || t < p {
            return Err(Error::InvalidParameter(format!(
                "design must satisfy T >= p >= 1, got T={t}, p={p}"
            )));
        }
        if column_labels.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} columns",
                column_labels.len(),
                p
            )));
        }
        Ok(Self { values, column_labels })
    }

    /// Assembles a design from equal-length columns.
    pub fn from_columns(columns: &[(&str, ArrayView1<f64>)]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidParameter("design needs at least one column".into()));
        }
        let t = columns[0].1.len();
        if columns.iter().any(|(_, c)| c.len() != t) {
            return Err(Error::DimensionMismatch("columns differ in length".into()));
        }
        let mut values = Array2::zeros((t, columns.len()));
        for (j, (_, col)) in columns.iter().enumerate() {
            values.column_mut(j).assign(col);
        }
        let labels = columns.iter().map(|(name, _)| (*name).to_string()).collect();
        Self::new(values, labels)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }
}

/// Output of an OLS solve.
///
/// `fitted + residuals` reconstructs the response, and the residuals are
/// orthogonal to every design column (normal equations), both to numerical
/// tolerance.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Array1<f64>,
    pub fitted: Array1<f64>,
    pub residuals: Array1<f64>,
}

/// Lower-triangular Cholesky factor of a symmetric matrix, with a relative
/// pivot tolerance so that exact and near collinearity both surface as
/// `RankDeficient` instead of exploding into huge coefficients.
fn cholesky(gram: &Array2<f64>) -> Result<Array2<f64>> {
    let p = gram.nrows();
    let max_diag = (0..p).map(|j| gram[(j, j)].abs()).fold(0.0f64, f64::max);
    let tol = RANK_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut diag = gram[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > tol) {
            return Err(Error::RankDeficient(format!(
                "Gram pivot {diag:.3e} at column {j} below tolerance {tol:.3e}"
            )));
        }
        let root = diag.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..p {
            let mut v = gram[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / root;
        }
    }
    Ok(l)
}

/// Solves `L L' x = b` in place given the lower factor `L`.
fn cholesky_solve(l: &Array2<f64>, b: &mut Array1<f64>) {
    let p = l.nrows();
    for i in 0..p {
        let mut v = b[i];
        for k in 0..i {
            v -= l[(i, k)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
    for i in (0..p).rev() {
        let mut v = b[i];
        for k in (i + 1)..p {
            v -= l[(k, i)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Pre-factorized solver for repeated least-squares against one design.
#[derive(Debug, Clone)]
pub(crate) struct GramSolver {
    design: Array2<f64>,
    factor: Array2<f64>,
}

impl GramSolver {
    pub(crate) fn new(design: ArrayView2<f64>) -> Result<Self> {
        let gram = design.t().dot(&design);
        let factor = cholesky(&gram)?;
        Ok(Self { design: design.to_owned(), factor })
    }

    pub(crate) fn coefficients(&self, response: ArrayView1<f64>) -> Result<Array1<f64>> {
        if response.len() != self.design.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "response length {} vs T={}",
                response.len(),
                self.design.nrows()
            )));
        }
        let mut rhs = self.design.t().dot(&response);
        cholesky_solve(&self.factor, &mut rhs);
        Ok(rhs)
    }

    pub(crate) fn fitted(&self, response: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.design.dot(&self.coefficients(response)?))
    }

    pub(crate) fn residuals(&self, response: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(&response - &self.fitted(response)?)
    }
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
pub(crate) fn spd_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "spd_solve: {}x{} vs {} rhs rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let factor = cholesky(a)?;
    let mut out = Array2::zeros(b.dim());
    for j in 0..b.ncols() {
        let mut col = b.column(j).to_owned();
        cholesky_solve(&factor, &mut col);
        out.column_mut(j).assign(&col);
    }
    Ok(out)
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn spd_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    spd_solve(a, &Array2::eye(a.nrows()))
}

/// Ordinary least squares of `response` on `design`.
pub fn ols_fit(design: &DesignMatrix, response: ArrayView1<f64>) -> Result<FitResult> {
    let solver = GramSolver::new(design.values())?;
    let coefficients = solver.coefficients(response)?;
    let fitted = design.values().dot(&coefficients);
    let residuals = &response - &fitted;
    Ok(FitResult { coefficients, fitted, residuals })
}

/// Orthogonal projection of `target` onto the column span of `design`.
pub fn project(design: &DesignMatrix, target: ArrayView1<f64>) -> Result<Array1<f64>> {
    GramSolver::new(design.values())?.fitted(target)
}

/// Residual of `target` after projecting onto `design`: the annihilator
/// `target - P target`, orthogonal to every design column.
pub fn annihilate(design: &DesignMatrix, target: ArrayView1<f64>) -> Result<Array1<f64>> {
    GramSolver::new(design.values())?.residuals(target)
}

/// Coefficient on one column of a multi-column regression, computed by
/// double residualization: regress both the focus column and the response
/// on the remaining columns, then run the simple regression of residual on
/// residual. Equals the corresponding `ols_fit` coefficient on the full
/// design.
pub fn fwl_coefficient(
    design: &DesignMatrix,
    focus_column_index: usize,
    response: ArrayView1<f64>,
) -> Result<f64> {
    let p = design.n_cols();
    if focus_column_index >= p {
        return Err(Error::InvalidParameter(format!(
            "focus column {focus_column_index} out of range for p={p}"
        )));
    }
    if response.len() != design.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "response length {} vs T={}",
            response.len(),
            design.n_rows()
        )));
    }
    let focus = design.values().column(focus_column_index).to_owned();
    let scale = focus.dot(&focus);
    let (focus_resid, response_resid) = if p == 1 {
        (focus, response.to_owned())
    } else {
        let mut controls = Array2::zeros((design.n_rows(), p - 1));
        let mut out = 0;
        for j in 0..p {
            if j != focus_column_index {
                controls.column_mut(out).assign(&design.values().column(j));
                out += 1;
            }
        }
        let solver = GramSolver::new(controls.view())?;
        (solver.residuals(focus.view())?, solver.residuals(response)?)
    };
    let denom = focus_resid.dot(&focus_resid);
    if !(denom > RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient(
            "focus column lies in the span of the controls".into(),
        ));
    }
    Ok(focus_resid.dot(&response_resid) / denom)
}
