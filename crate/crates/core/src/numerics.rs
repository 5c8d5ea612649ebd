//! Dense row-major matrices and the ridge least-squares solve used for the
//! output layer.
//!
//! Products and decompositions are delegated to `faer`, always single-threaded
//! so that results are bitwise reproducible across runs.

use faer::linalg::solvers::SolveLstsq;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrix of `f64` in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        let m = Matrix { rows, cols, data };
        m.check_finite("matrix")?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Single column matrix.
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    /// Wraps data without the finiteness scan. Used for internal results
    /// that are checked separately.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics
        let width = self.cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_raw(idx.len(), self.cols, data)
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.row_iter().map(l2_norm).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => Err(Error::NonFinite {
                what,
                row: p / self.cols.max(1),
                col: p % self.cols.max(1),
            }),
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        matmul(self, rhs)
    }

    fn view(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    fn view_mut(&mut self) -> MatMut<'_, f64> {
        MatMut::from_row_major_slice_mut(&mut self.data, self.rows, self.cols)
    }

    fn from_faer(m: MatRef<'_, f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `A · B`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    if a.cols == 0 {
        return Ok(out);
    }
    faer::linalg::matmul::matmul(out.view_mut(), Accum::Replace, a.view(), b.view(), 1.0, Par::Seq);
    Ok(out)
}

/// `A · Bᵀ`, used for applying a weight matrix stored one neuron per row.
pub fn matmul_transposed(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::DimensionMismatch {
            op: "matmul_transposed",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.cols,
            right_cols: b.rows,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.rows);
    if a.cols == 0 {
        return Ok(out);
    }
    faer::linalg::matmul::matmul(
        out.view_mut(),
        Accum::Replace,
        a.view(),
        b.view().transpose(),
        1.0,
        Par::Seq,
    );
    Ok(out)
}

/// Whether the solver appends an all-ones column for the bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Intercept {
    Fit,
    None,
}

/// Output of [`solve_ridge`]. Predictions are `A · weights − bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeSolution {
    /// K×O, one row per design column.
    pub weights: Matrix,
    /// Length O; the negated fitted intercept.
    pub bias: Vec<f64>,
    /// Frobenius norm of `A · weights − bias − B`.
    pub residual_norm: f64,
}

impl RidgeSolution {
    pub fn predict(&self, a: &Matrix) -> Result<Matrix> {
        let mut out = matmul(a, &self.weights)?;
        for i in 0..out.rows() {
            for (v, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *v -= b;
            }
        }
        Ok(out)
    }
}

/// Minimizes `‖[A|1]·Θ − B‖²_F + λ‖Θ‖²_F` and splits `Θ` into weights and
/// bias.
///
/// With `λ = 0` the minimum-norm solution is taken from a thin SVD, so
/// rank-deficient designs are fine. With `λ > 0` the stacked system
/// `[[A|1]; √λ·I]` is solved by Householder QR, which never forms `AᵀA`.
pub fn solve_ridge(a: &Matrix, b: &Matrix, lambda: f64) -> Result<RidgeSolution> {
    solve_ridge_with(a, b, lambda, Intercept::Fit)
}

pub fn solve_ridge_with(
    a: &Matrix,
    b: &Matrix,
    lambda: f64,
    intercept: Intercept,
) -> Result<RidgeSolution> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch {
            op: "solve_ridge",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    if a.rows == 0 {
        return Err(Error::invalid("ridge solve needs at least one row"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    a.check_finite("design matrix")?;
    b.check_finite("target matrix")?;

    let m = a.rows;
    let k = a.cols;
    let o = b.cols;
    let n = match intercept {
        Intercept::Fit => k + 1,
        Intercept::None => k,
    };
    if n == 0 {
        return Err(Error::invalid("ridge solve needs at least one unknown"));
    }

    let design = Mat::<f64>::from_fn(m, n, |i, j| if j < k { a.get(i, j) } else { 1.0 });
    let theta = if lambda == 0.0 {
        min_norm_lstsq(design.as_ref(), b.view())?
    } else {
        let sqrt_lambda = lambda.sqrt();
        let stacked = Mat::<f64>::from_fn(m + n, n, |i, j| {
            if i < m {
                design[(i, j)]
            } else if i - m == j {
                sqrt_lambda
            } else {
                0.0
            }
        });
        let rhs = Mat::<f64>::from_fn(m + n, o, |i, j| if i < m { b.get(i, j) } else { 0.0 });
        stacked.qr().solve_lstsq(&rhs)
    };

    let theta = Matrix::from_faer(theta.as_ref());
    theta.check_finite("ridge solution")?;

    let mut fitted = Mat::<f64>::zeros(m, o);
    faer::linalg::matmul::matmul(
        fitted.as_mut(),
        Accum::Replace,
        design.as_ref(),
        theta.view(),
        1.0,
        Par::Seq,
    );
    let mut sq = 0.0;
    for i in 0..m {
        for j in 0..o {
            let r = fitted[(i, j)] - b.get(i, j);
            sq += r * r;
        }
    }

    let weights = Matrix::from_fn(k, o, |i, j| theta.get(i, j));
    let bias = match intercept {
        Intercept::Fit => theta.row(k).iter().map(|v| -v).collect(),
        Intercept::None => vec![0.0; o],
    };
    Ok(RidgeSolution {
        weights,
        bias,
        residual_norm: sq.sqrt(),
    })
}

/// Pseudo-inverse solve with the usual `max(m, n)·eps·σ_max` cutoff.
fn min_norm_lstsq(design: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let svd = design
        .thin_svd()
        .map_err(|e| Error::Solver(format!("SVD did not converge: {e:?}")))?;
    let u = svd.U();
    let v = svd.V();
    let s = svd.S().column_vector();
    let rank_cut = if s.nrows() == 0 {
        0.0
    } else {
        s[0] * f64::EPSILON * design.nrows().max(design.ncols()) as f64
    };

    // Uᵀ B, scaled by 1/σ on the kept singular values
    let mut utb = Mat::<f64>::zeros(u.ncols(), rhs.ncols());
    faer::linalg::matmul::matmul(
        utb.as_mut(),
        Accum::Replace,
        u.transpose(),
        rhs,
        1.0,
        Par::Seq,
    );
    for i in 0..s.nrows() {
        let scale = if s[i] > rank_cut { 1.0 / s[i] } else { 0.0 };
        for j in 0..utb.ncols() {
            utb[(i, j)] *= scale;
        }
    }
    let mut out = Mat::<f64>::zeros(design.ncols(), rhs.ncols());
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, v, utb.as_ref(), 1.0, Par::Seq);
    Ok(out)
}
