//! Idempotent (projector) calculus and subspace determinants.
//!
//! An idempotent `J` is a projector from `R^d` onto `range(J)`, not
//! necessarily orthogonal. `det_sub(J, A)` is the determinant of the
//! restriction of `J A` to `range(J)`; it does not depend on the choice of
//! basis for that range.

use alloc::vec::Vec;

use libm::hypot;

use super::eigen::eigenvalues;
use super::lu::Lu;
use super::{dot, norm2, LinalgError, Mat, DEFAULT_TOL};

/// Validated idempotent with its rank and the tolerance it was checked at.
#[derive(Debug, Clone)]
pub struct Idempotent {
    mat: Mat,
    rank: usize,
    tol: f64,
}

impl Idempotent {
    /// Checks `||J J - J|| <= tol` and counts the eigenvalues within `tol`
    /// of 1 (the rank).
    pub fn new(mat: Mat, tol: f64) -> Result<Self, LinalgError> {
        if !mat.is_square() {
            return Err(LinalgError::NotSquare);
        }
        let defect = mat.matmul(&mat).sub(&mat).op_norm();
        if defect.is_nan() || defect > tol {
            return Err(LinalgError::NotIdempotent { defect });
        }
        // Eigenvalues of a near-idempotent cluster at 0 and 1; counting the
        // cluster at 1 is robust to the counting cutoff.
        let cutoff = (16.0 * tol).clamp(1e-12, 0.5);
        let rank = eigenvalues(&mat)?
            .iter()
            .filter(|&&(re, im)| hypot(re - 1.0, im) <= cutoff)
            .count();
        Ok(Idempotent { mat, rank, tol })
    }

    pub fn with_default_tol(mat: Mat) -> Result<Self, LinalgError> {
        Idempotent::new(mat, DEFAULT_TOL)
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// Complementary idempotent `I - J`.
    pub fn complement(&self) -> Result<Idempotent, LinalgError> {
        Idempotent::new(Mat::identity(self.dim()).sub(&self.mat), self.tol)
    }
}

/// `||A A - A|| <= tol` in operator norm.
pub fn is_idempotent(a: &Mat, tol: f64) -> bool {
    a.is_square() && a.matmul(a).sub(a).op_norm() <= tol
}

/// Whether `K` is under `J`: `K != J`, `JK = K` and `KJ = K` within `tol`.
pub fn is_under(k: &Idempotent, j: &Idempotent, tol: f64) -> bool {
    if k.dim() != j.dim() {
        return false;
    }
    let km = k.mat();
    let jm = j.mat();
    km.sub(jm).op_norm() > tol
        && jm.matmul(km).sub(km).op_norm() <= tol
        && km.matmul(jm).sub(km).op_norm() <= tol
}

/// Orthonormal basis of `range(J)` by column-pivoted Gram-Schmidt on the
/// columns of `J`; columns with residual pivot below `1e-10` are dropped.
/// Returns a `d x rank` matrix.
pub fn range_basis(j: &Mat) -> Option<Mat> {
    let d = j.dim();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|c| j.col(c)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();

    loop {
        let (best, best_norm) = cols
            .iter()
            .enumerate()
            .map(|(i, c)| (i, norm2(c)))
            .fold((usize::MAX, 0.0), |acc, (i, n)| if n > acc.1 { (i, n) } else { acc });
        if best == usize::MAX || best_norm <= 1e-10 {
            break;
        }
        let mut v = cols.swap_remove(best);
        for b in &basis {
            let proj = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let n = norm2(&v);
        if n <= 1e-10 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= n;
        }
        // Re-orthogonalize the remaining columns against the accepted one.
        for c in cols.iter_mut() {
            let proj = dot(c, &v);
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= proj * vi;
            }
        }
        basis.push(v);
    }

    if basis.is_empty() {
        return None;
    }
    let r = basis.len();
    let mut b = Mat::zeros(d, r);
    for (c, col) in basis.iter().enumerate() {
        for i in 0..d {
            b[(i, c)] = col[i];
        }
    }
    Some(b)
}

/// Determinant of the restriction of `J A` to `range(J)`.
///
/// With `B` an orthonormal basis matrix of `range(J)`, the restriction has
/// matrix `C = B^T (J A B)` (so that `B C = J A B`), and the value is
/// `det C`. Errors on rank-zero idempotents.
pub fn det_sub(j: &Idempotent, a: &Mat) -> Result<f64, LinalgError> {
    if j.rank() == 0 {
        return Err(LinalgError::ZeroSubspace);
    }
    if a.dim() != j.dim() {
        return Err(LinalgError::DimMismatch);
    }
    let basis = range_basis(j.mat()).ok_or(LinalgError::ZeroSubspace)?;
    let ja_b = j.mat().matmul(a).matmul(&basis);
    let c = basis.transpose().matmul(&ja_b);
    Ok(Lu::new(&c)?.det())
}

/// Convenience: `det_sub` with `J` taken at the default tolerance.
pub fn det_sub_mat(j: &Mat, a: &Mat) -> Result<f64, LinalgError> {
    det_sub(&Idempotent::with_default_tol(j.clone())?, a)
}
