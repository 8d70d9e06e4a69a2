//! Dense small-dimension real matrix algebra.
//!
//! Target sizes are `d <= 10`: everything favors robustness over asymptotic
//! cost. Matrices are row-major and rectangular internally; the operations
//! that are only meaningful for square matrices check squareness at entry.

mod eigen;
mod funcs;
mod idempotent;
mod lu;
mod lyapunov;

pub use eigen::{
    eigenvalues, min_real_eigenvalue, psd_margin, spd_inv_sqrt, spd_sqrt, spectral_radius,
    sym_eigen, SymEigen,
};
pub use funcs::{mat_exp, mat_log, polar_orthogonal, sign_projector, van_loan_cov};
pub use idempotent::{det_sub, det_sub_mat, is_idempotent, is_under, range_basis, Idempotent};
pub use lu::Lu;
pub use lyapunov::{solve_lyapunov, solve_stein};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use libm::{fabs, sqrt};

/// Default tolerance for idempotency and membership algebra.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    NotSquare,
    DimMismatch,
    /// Matrix is singular or nearly singular.
    Singular,
    /// Result left the finite range; carries the offending input norm.
    Overflow { norm: f64 },
    /// Spectrum touches the closed negative real axis: the principal
    /// logarithm is not defined.
    PrincipalBranch,
    /// `det_J` is undefined on the zero subspace.
    ZeroSubspace,
    /// Iterative algorithm exhausted its budget.
    ConvergenceFailed,
    /// Matrix failed an idempotency check.
    NotIdempotent { defect: f64 },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSquare => write!(f, "matrix must be square"),
            LinalgError::DimMismatch => write!(f, "matrix dimensions do not match"),
            LinalgError::Singular => write!(f, "matrix is singular"),
            LinalgError::Overflow { norm } => {
                write!(f, "result is non-finite (input norm {norm:e})")
            }
            LinalgError::PrincipalBranch => {
                write!(f, "log not principal-branch computable")
            }
            LinalgError::ZeroSubspace => write!(f, "det_J undefined on zero subspace"),
            LinalgError::ConvergenceFailed => write!(f, "iteration did not converge"),
            LinalgError::NotIdempotent { defect } => {
                write!(f, "matrix is not idempotent (defect {defect:e})")
            }
        }
    }
}

impl core::error::Error for LinalgError {}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Mat::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        assert!(r >= 1);
        let c = rows[0].len();
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        assert!(rows >= 1 && cols >= 1);
        Mat { rows, cols, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Mat::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        let mut m = Mat::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        assert!(self.is_square(), "dim() on a non-square matrix");
        self.rows
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Non-negative integer matrix power by binary exponentiation.
    pub fn powi(&self, mut exp: u64) -> Mat {
        assert!(self.is_square());
        let mut result = Mat::identity(self.rows);
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                result = result.matmul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| if fabs(x) > m { fabs(x) } else { m })
    }

    /// Operator 2-norm, computed exactly as `sqrt(lambda_max(A^T A))`.
    pub fn op_norm(&self) -> f64 {
        let gram = self.transpose().matmul(self);
        let eig = sym_eigen(&gram);
        let lam = eig.values.iter().fold(0.0f64, |m, &x| if x > m { x } else { m });
        sqrt(if lam > 0.0 { lam } else { 0.0 })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Symmetric part `(A + A^T) / 2`.
    pub fn symmetrize(&self) -> Mat {
        assert!(self.is_square());
        let mut out = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..self.rows {
                out[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        out
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn det(&self) -> Result<f64, LinalgError> {
        Ok(Lu::new(self)?.det())
    }

    pub fn inverse(&self) -> Result<Mat, LinalgError> {
        Lu::new(self)?.inverse()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    sqrt(dot(v, v))
}
