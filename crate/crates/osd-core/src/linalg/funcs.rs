//! Matrix functions: exponential, principal logarithm, sign-function
//! spectral projectors, orthogonal polar factors and the block-exponential
//! noise integral.

use libm::{ceil, fabs, log2};

use super::eigen::eigenvalues;
use super::{LinalgError, Mat};

/// `exp(t A)` by scaling-and-squaring with a truncated power series.
///
/// Relative error is well below `1e-12` for `||tA|| <= 10`.
pub fn mat_exp(a: &Mat, t: f64) -> Result<Mat, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare);
    }
    let m = a.scale(t);
    if !m.is_finite() {
        return Err(LinalgError::Overflow { norm: a.max_abs() });
    }
    let norm = m.frob_norm();
    let squarings = if norm > 0.5 {
        ceil(log2(norm / 0.5)) as u32
    } else {
        0
    };
    if squarings > 100 {
        return Err(LinalgError::Overflow { norm });
    }
    let scaled = m.scale(libm::scalbn(1.0, -(squarings as i32)));

    let n = a.dim();
    let mut result = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..=40u32 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        result = result.add(&term);
        if term.frob_norm() <= 1e-18 * result.frob_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.is_finite() {
        return Err(LinalgError::Overflow { norm });
    }
    Ok(result)
}

/// Principal matrix logarithm by inverse scaling-and-squaring.
///
/// Repeated Denman-Beavers square roots bring the argument close to the
/// identity, a log series finishes, and the result is rescaled. Requires an
/// invertible input with no eigenvalue on the closed negative real axis;
/// `mat_exp(&mat_log(a)?, 1.0)` recovers `a` to about `1e-9`.
pub fn mat_log(a: &Mat) -> Result<Mat, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare);
    }
    if !a.is_finite() {
        return Err(LinalgError::Overflow { norm: a.max_abs() });
    }
    let scale = a.frob_norm().max(1.0);
    for (re, im) in eigenvalues(a)? {
        if re <= 1e-12 * scale && fabs(im) <= 1e-12 * scale {
            return Err(LinalgError::PrincipalBranch);
        }
    }

    let n = a.dim();
    let mut current = a.clone();
    let mut halvings = 0u32;
    while current.sub(&Mat::identity(n)).frob_norm() > 0.25 {
        if halvings >= 64 {
            return Err(LinalgError::ConvergenceFailed);
        }
        current = sqrtm_db(&current)?;
        halvings += 1;
    }

    // log(I + X) series; ||X|| <= 0.25 so 40 terms reach machine precision.
    let x = current.sub(&Mat::identity(n));
    let mut result = Mat::zeros(n, n);
    let mut power = x.clone();
    for k in 1..=48u32 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        result = result.add(&power.scale(sign / k as f64));
        if power.frob_norm() / k as f64 <= 1e-18 * (result.frob_norm() + 1e-30) {
            break;
        }
        power = power.matmul(&x);
    }
    let out = result.scale(libm::scalbn(1.0, halvings as i32));
    if !out.is_finite() {
        return Err(LinalgError::Overflow { norm: a.max_abs() });
    }
    Ok(out)
}

/// Principal square root via the Denman-Beavers iteration.
fn sqrtm_db(a: &Mat) -> Result<Mat, LinalgError> {
    let n = a.dim();
    let mut y = a.clone();
    let mut z = Mat::identity(n);
    for _ in 0..80 {
        let y_next = y.add(&z.inverse()?).scale(0.5);
        let z_next = z.add(&y.inverse()?).scale(0.5);
        let step = y_next.sub(&y).frob_norm();
        y = y_next;
        z = z_next;
        if step <= 1e-15 * (y.frob_norm() + 1e-30) {
            return Ok(y);
        }
    }
    Err(LinalgError::ConvergenceFailed)
}

/// Spectral projector onto the invariant subspace of eigenvalues with
/// modulus greater than `radius`, along the complementary one.
///
/// A Moebius transform maps the splitting circle to the imaginary axis and a
/// scaled Newton iteration computes the matrix sign; no eigenvalue may lie
/// near the circle itself.
pub fn sign_projector(t: &Mat, radius: f64) -> Result<Mat, LinalgError> {
    assert!(radius > 0.0);
    let n = t.dim();
    let scaled = t.scale(1.0 / radius);
    let shifted = scaled.add(&Mat::identity(n));
    let w = scaled.sub(&Mat::identity(n)).matmul(&shifted.inverse()?);

    let mut s = w;
    let mut converged = false;
    for _ in 0..100 {
        let det = Lu::new(&s)?.det();
        let mu = if det != 0.0 && det.is_finite() {
            libm::pow(fabs(det), -1.0 / n as f64)
        } else {
            1.0
        };
        let ms = s.scale(mu);
        let next = ms.add(&ms.inverse()?).scale(0.5);
        let step = next.sub(&s).frob_norm();
        s = next;
        if step <= 1e-14 * (s.frob_norm() + 1e-30) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::ConvergenceFailed);
    }
    let mut p = Mat::identity(n).add(&s).scale(0.5);
    // Newton polish toward exact idempotency: P <- 3P^2 - 2P^3.
    for _ in 0..2 {
        let p2 = p.matmul(&p);
        p = p2.scale(3.0).sub(&p2.matmul(&p).scale(2.0));
    }
    Ok(p)
}

use super::lu::Lu;

/// Orthogonal polar factor of an invertible matrix (Newton iteration).
pub fn polar_orthogonal(m: &Mat) -> Result<Mat, LinalgError> {
    let mut p = m.clone();
    for _ in 0..100 {
        let next = p.add(&p.inverse()?.transpose()).scale(0.5);
        let step = next.sub(&p).frob_norm();
        p = next;
        if step <= 1e-15 * (p.frob_norm() + 1e-30) {
            return Ok(p);
        }
    }
    Err(LinalgError::ConvergenceFailed)
}

/// One-step exact discretization data for the operator OU process:
/// returns `(exp(-hQ), Sigma_h)` with
/// `Sigma_h = integral_0^h exp(-sQ) D exp(-sQ^T) ds`,
/// computed from the exponential of the augmented block matrix
/// `[[-Q, D], [0, Q^T]]`.
pub fn van_loan_cov(q: &Mat, d: &Mat, h: f64) -> Result<(Mat, Mat), LinalgError> {
    let n = q.dim();
    assert_eq!(d.dim(), n);
    let mut block = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = -q[(i, j)];
            block[(i, n + j)] = d[(i, j)];
            block[(n + i, n + j)] = q[(j, i)];
        }
    }
    let f = mat_exp(&block, h)?;
    let mut e = Mat::zeros(n, n);
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] = f[(i, j)];
            g[(i, j)] = f[(i, n + j)];
        }
    }
    let sigma = g.matmul(&e.transpose()).symmetrize();
    Ok((e, sigma))
}
