//! Lyapunov-type solvers via Kronecker vectorization; `d <= 10` keeps the
//! `d^2 x d^2` systems trivial.

use alloc::vec;

use super::lu::Lu;
use super::{LinalgError, Mat};

/// Solve the continuous Lyapunov equation `Q S + S Q^T = D` for `S`.
pub fn solve_lyapunov(q: &Mat, d: &Mat) -> Result<Mat, LinalgError> {
    let n = q.dim();
    assert_eq!(d.dim(), n);
    // vec(QS) = (I (x) Q) vec(S), vec(S Q^T) = (Q (x) I) vec(S),
    // with column-stacking vec.
    let mut system = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // (I (x) Q): row (j*n + i), col (j*n + k) += Q[i][k]
                system[(j * n + i, j * n + k)] += q[(i, k)];
                // (Q (x) I): row (j*n + i), col (k*n + i) += Q[j][k]
                system[(j * n + i, k * n + i)] += q[(j, k)];
            }
        }
    }
    let mut rhs = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = d[(i, j)];
        }
    }
    let x = Lu::new(&system)?.solve(&rhs);
    let mut s = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] = x[j * n + i];
        }
    }
    Ok(s.symmetrize())
}

/// Solve the discrete-time (Stein) equation `S = B S B^T + C` for `S`;
/// the stationary covariance of a vector AR(1) with transition `B`.
pub fn solve_stein(b: &Mat, c: &Mat) -> Result<Mat, LinalgError> {
    let n = b.dim();
    assert_eq!(c.dim(), n);
    // (I - B (x) B) vec(S) = vec(C).
    let mut system = Mat::identity(n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // vec(B S B^T)[j*n + i] += B[i][k] B[j][l] vec(S)[l*n + k]
                    system[(j * n + i, l * n + k)] -= b[(i, k)] * b[(j, l)];
                }
            }
        }
    }
    let mut rhs = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = c[(i, j)];
        }
    }
    let x = Lu::new(&system)?.solve(&rhs);
    let mut s = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] = x[j * n + i];
        }
    }
    Ok(s.symmetrize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_scalar() {
        // q s + s q = d -> s = d / (2q)
        let s = solve_lyapunov(&Mat::scalar(1, 1.0), &Mat::scalar(1, 1.0)).unwrap();
        assert!((s[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_residual_vanishes() {
        let q = Mat::from_rows(&[&[1.0, 0.3], &[-0.1, 2.0]]);
        let d = Mat::from_rows(&[&[1.0, 0.2], &[0.2, 0.5]]);
        let s = solve_lyapunov(&q, &d).unwrap();
        let res = q.matmul(&s).add(&s.matmul(&q.transpose())).sub(&d);
        assert!(res.max_abs() < 1e-12);
    }

    #[test]
    fn stein_scalar_geometric_series() {
        // s = b^2 s + 1 -> s = 1 / (1 - b^2) = 4/3 for b = 0.5.
        let s = solve_stein(&Mat::scalar(1, 0.5), &Mat::scalar(1, 1.0)).unwrap();
        assert!((s[(0, 0)] - 4.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn stein_residual_vanishes() {
        let b = Mat::from_rows(&[&[0.5, 0.2], &[0.0, 0.3]]);
        let c = Mat::identity(2);
        let s = solve_stein(&b, &c).unwrap();
        let res = b.matmul(&s).matmul(&b.transpose()).add(&c).sub(&s);
        assert!(res.max_abs() < 1e-13);
    }
}
