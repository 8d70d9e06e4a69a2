//! Eigenvalue routines: cyclic Jacobi for symmetric matrices and a real
//! Schur (Francis double-shift QR) reduction for general spectra.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, hypot, sqrt};

use super::{LinalgError, Mat};

/// Eigendecomposition of a symmetric matrix: `A = V diag(values) V^T`
/// with orthonormal columns in `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

/// Cyclic Jacobi on the symmetric part of `a`.
pub fn sym_eigen(a: &Mat) -> SymEigen {
    let n = a.dim();
    let mut m = a.symmetrize();
    let mut v = Mat::identity(n);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if sqrt(off) < 1e-15 * (m.frob_norm() + 1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if fabs(apq) < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                // Stable rotation choice: smaller root of t^2 + 2 theta t - 1 = 0.
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values = (0..n).map(|i| m[(i, i)]).collect();
    SymEigen { values, vectors: v }
}

/// Smallest eigenvalue of the symmetric part `(S + S^T)/2`.
pub fn psd_margin(s: &Mat) -> f64 {
    sym_eigen(s)
        .values
        .iter()
        .fold(f64::INFINITY, |m, &x| if x < m { x } else { m })
}

/// Symmetric positive-semidefinite square root; eigenvalues below `-1e-10`
/// relative are rejected, small negatives are clamped to zero.
pub fn spd_sqrt(a: &Mat) -> Result<Mat, LinalgError> {
    sym_power(a, |lam| Ok(sqrt(lam)))
}

/// Inverse symmetric square root of a positive-definite matrix.
pub fn spd_inv_sqrt(a: &Mat) -> Result<Mat, LinalgError> {
    sym_power(a, |lam| {
        if lam <= 0.0 {
            Err(LinalgError::Singular)
        } else {
            Ok(1.0 / sqrt(lam))
        }
    })
}

fn sym_power(a: &Mat, f: impl Fn(f64) -> Result<f64, LinalgError>) -> Result<Mat, LinalgError> {
    let eig = sym_eigen(a);
    let scale = eig
        .values
        .iter()
        .fold(0.0f64, |m, &x| if fabs(x) > m { fabs(x) } else { m })
        .max(1.0);
    let n = a.dim();
    let mut d = Mat::zeros(n, n);
    for (i, &lam) in eig.values.iter().enumerate() {
        let lam = if lam < 0.0 {
            if lam < -1e-10 * scale {
                return Err(LinalgError::Singular);
            }
            0.0
        } else {
            lam
        };
        d[(i, i)] = f(lam)?;
    }
    Ok(eig.vectors.matmul(&d).matmul(&eig.vectors.transpose()))
}

/// Eigenvalues of a general real matrix as `(re, im)` pairs, via Hessenberg
/// reduction followed by Francis double-shift QR.
pub fn eigenvalues(a: &Mat) -> Result<Vec<(f64, f64)>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare);
    }
    if !a.is_finite() {
        return Err(LinalgError::Overflow { norm: a.max_abs() });
    }
    let n = a.dim();
    if n == 1 {
        return Ok(vec![(a[(0, 0)], 0.0)]);
    }
    let mut h = hessenberg(a);
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iter_since_deflation = 0usize;
    let mut total_iter = 0usize;
    let budget = 60 * n;
    let norm_scale = h.frob_norm().max(1e-300);

    loop {
        // Zero out negligible subdiagonals in the current trailing block.
        let mut lo = hi;
        while lo > 0 {
            let small = f64::EPSILON * (fabs(h[(lo - 1, lo - 1)]) + fabs(h[(lo, lo)]) + norm_scale);
            if fabs(h[(lo, lo - 1)]) <= small {
                h[(lo, lo - 1)] = 0.0;
                break;
            }
            lo -= 1;
        }

        if lo == hi {
            eigs.push((h[(hi, hi)], 0.0));
            if hi == 0 {
                break;
            }
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        if lo + 1 == hi {
            let (e1, e2) = eig2x2(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
            eigs.push(e1);
            eigs.push(e2);
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            iter_since_deflation = 0;
            continue;
        }

        total_iter += 1;
        iter_since_deflation += 1;
        if total_iter > budget {
            return Err(LinalgError::ConvergenceFailed);
        }

        // Implicit double shift from the trailing 2x2; ad-hoc exceptional
        // shift when the sweep stalls.
        let (mut s, mut t);
        if iter_since_deflation % 11 == 10 {
            let ex = fabs(h[(hi, hi - 1)]) + fabs(h[(hi - 1, hi - 2)]);
            s = 2.0 * (h[(hi, hi)] + 0.75 * ex);
            t = (h[(hi, hi)] + 0.75 * ex) * (h[(hi, hi)] + 0.75 * ex);
        } else {
            s = h[(hi - 1, hi - 1)] + h[(hi, hi)];
            t = h[(hi - 1, hi - 1)] * h[(hi, hi)] - h[(hi - 1, hi)] * h[(hi, hi - 1)];
        }
        if !s.is_finite() || !t.is_finite() {
            s = 0.0;
            t = 0.0;
        }

        francis_sweep(&mut h, lo, hi, s, t);
    }

    Ok(eigs)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Mat) -> Result<f64, LinalgError> {
    Ok(eigenvalues(a)?
        .iter()
        .fold(0.0, |m, &(re, im)| {
            let r = hypot(re, im);
            if r > m {
                r
            } else {
                m
            }
        }))
}

/// Smallest real part over the spectrum.
pub fn min_real_eigenvalue(a: &Mat) -> Result<f64, LinalgError> {
    Ok(eigenvalues(a)?
        .iter()
        .fold(f64::INFINITY, |m, &(re, _)| if re < m { re } else { m }))
}

fn hessenberg(a: &Mat) -> Mat {
    let n = a.dim();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k below the subdiagonal.
        let mut x: Vec<f64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha = norm_slice(&x);
        if alpha < 1e-300 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        x[0] += sign * alpha;
        let vnorm = norm_slice(&x);
        if vnorm < 1e-300 {
            continue;
        }
        for xi in x.iter_mut() {
            *xi /= vnorm;
        }
        // H <- P H P with P = I - 2 v v^T acting on rows/cols k+1..n.
        for j in 0..n {
            let mut dot = 0.0;
            for (idx, i) in (k + 1..n).enumerate() {
                dot += x[idx] * h[(i, j)];
            }
            for (idx, i) in (k + 1..n).enumerate() {
                h[(i, j)] -= 2.0 * x[idx] * dot;
            }
        }
        for i in 0..n {
            let mut dot = 0.0;
            for (idx, j) in (k + 1..n).enumerate() {
                dot += x[idx] * h[(i, j)];
            }
            for (idx, j) in (k + 1..n).enumerate() {
                h[(i, j)] -= 2.0 * x[idx] * dot;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    h
}

fn francis_sweep(h: &mut Mat, lo: usize, hi: usize, s: f64, t: f64) {
    let n = h.dim();
    // First column of (H^2 - s H + t I) restricted to the active block.
    let mut x = h[(lo, lo)] * h[(lo, lo)] + h[(lo, lo + 1)] * h[(lo + 1, lo)] - s * h[(lo, lo)] + t;
    let mut y = h[(lo + 1, lo)] * (h[(lo, lo)] + h[(lo + 1, lo + 1)] - s);
    let mut z = if lo + 2 <= hi {
        h[(lo + 1, lo)] * h[(lo + 2, lo + 1)]
    } else {
        0.0
    };

    for k in lo..hi - 1 {
        // Every window in the chase has three rows; the trailing two-row
        // reflector is applied after the loop.
        let (v, beta) = householder3(x, y, z, false);
        if beta != 0.0 {
            let row_start = if k > lo { k.saturating_sub(1) } else { lo };
            let m = 3;
            // Apply P = I - beta v v^T from the left to rows k..k+m.
            for j in row_start..n {
                let mut dot = 0.0;
                for (idx, vi) in v.iter().take(m).enumerate() {
                    dot += vi * h[(k + idx, j)];
                }
                dot *= beta;
                for (idx, vi) in v.iter().take(m).enumerate() {
                    h[(k + idx, j)] -= vi * dot;
                }
            }
            // And from the right to columns k..k+m.
            let col_end = if k + 4 <= hi { k + 4 } else { hi };
            for i in 0..=col_end {
                let mut dot = 0.0;
                for (idx, vi) in v.iter().take(m).enumerate() {
                    dot += vi * h[(i, k + idx)];
                }
                dot *= beta;
                for (idx, vi) in v.iter().take(m).enumerate() {
                    h[(i, k + idx)] -= vi * dot;
                }
            }
        }
        x = h[(k + 1, k)];
        y = h[(k + 2, k)];
        z = if k + 3 <= hi { h[(k + 3, k)] } else { 0.0 };
    }

    // Final Givens rotation on the 2-vector (x, y).
    let k = hi - 1;
    let (v, beta) = householder3(x, y, 0.0, true);
    if beta != 0.0 {
        for j in k.saturating_sub(1).max(lo)..n {
            let dot = beta * (v[0] * h[(k, j)] + v[1] * h[(k + 1, j)]);
            h[(k, j)] -= v[0] * dot;
            h[(k + 1, j)] -= v[1] * dot;
        }
        for i in 0..=hi {
            let dot = beta * (v[0] * h[(i, k)] + v[1] * h[(i, k + 1)]);
            h[(i, k)] -= v[0] * dot;
            h[(i, k + 1)] -= v[1] * dot;
        }
    }

    // Restore exact Hessenberg zeros below the bulge path.
    for i in lo + 2..=hi {
        for j in lo..i - 1 {
            h[(i, j)] = 0.0;
        }
    }
}

/// Householder data annihilating the tail of `(x, y, z)` (or `(x, y)` when
/// `pair` is set). Returns unit-free `v` and `beta` with `P = I - beta v v^T`.
fn householder3(x: f64, y: f64, z: f64, pair: bool) -> ([f64; 3], f64) {
    let (nx, used_z) = if pair { (hypot(x, y), 0.0) } else { (norm3(x, y, z), z) };
    if nx < 1e-300 {
        return ([0.0; 3], 0.0);
    }
    let alpha = if x >= 0.0 { -nx } else { nx };
    let v0 = x - alpha;
    let v = [v0, y, used_z];
    let vnorm2 = v0 * v0 + y * y + used_z * used_z;
    if vnorm2 < 1e-300 {
        return ([0.0; 3], 0.0);
    }
    (v, 2.0 / vnorm2)
}

fn norm3(x: f64, y: f64, z: f64) -> f64 {
    sqrt(x * x + y * y + z * z)
}

fn norm_slice(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

fn eig2x2(a: f64, b: f64, c: f64, d: f64) -> ((f64, f64), (f64, f64)) {
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let root = sqrt(disc);
        // Stable split: larger-magnitude root first, mate via the determinant.
        let l1 = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
        let l2 = if fabs(l1) > 1e-300 { det / l1 } else { half_tr - root };
        ((l1, 0.0), (l2, 0.0))
    } else {
        let im = sqrt(-disc);
        ((half_tr, im), (half_tr, -im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric
    /// solution of the characteristic cubic). Independent oracle for the
    /// Jacobi path at d <= 3.
    fn sym3_eigen_oracle(m: &Mat) -> Vec<f64> {
        use libm::{acos, cos};
        let (a, b, c) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
        let (d, e, f) = (m[(0, 1)], m[(1, 2)], m[(0, 2)]);
        let p1 = d * d + e * e + f * f;
        if p1 < 1e-30 {
            return sorted(alloc::vec![a, b, c]);
        }
        let q = (a + b + c) / 3.0;
        let p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0 * p1;
        let p = sqrt(p2 / 6.0);
        let bm = Mat::from_rows(&[
            &[(a - q) / p, d / p, f / p],
            &[d / p, (b - q) / p, e / p],
            &[f / p, e / p, (c - q) / p],
        ]);
        let r = bm.det().unwrap_or(0.0) / 2.0;
        let phi = if r <= -1.0 {
            core::f64::consts::PI / 3.0
        } else if r >= 1.0 {
            0.0
        } else {
            acos(r) / 3.0
        };
        let e1 = q + 2.0 * p * cos(phi);
        let e3 = q + 2.0 * p * cos(phi + 2.0 * core::f64::consts::PI / 3.0);
        let e2 = 3.0 * q - e1 - e3;
        sorted(alloc::vec![e1, e2, e3])
    }

    fn random_symmetric(rng: &mut Rng, n: usize, scale: f64) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = scale * (rng.next_f64() * 2.0 - 1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn psd_margin_trivial_cases() {
        assert!((psd_margin(&Mat::identity(3)) - 1.0).abs() < 1e-14);
        assert!((psd_margin(&Mat::diag(&[1.0, -2.0])) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn psd_margin_matches_cubic_oracle() {
        let mut rng = Rng::new(11);
        for _ in 0..200 {
            let m = random_symmetric(&mut rng, 3, 2.0);
            let oracle = sym3_eigen_oracle(&m);
            assert!(
                (psd_margin(&m) - oracle[0]).abs() < 1e-9,
                "margin {} vs oracle {}",
                psd_margin(&m),
                oracle[0]
            );
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let m = random_symmetric(&mut rng, 5, 1.5);
            let eig = sym_eigen(&m);
            let d = Mat::diag(&eig.values);
            let rec = eig.vectors.matmul(&d).matmul(&eig.vectors.transpose());
            assert!(rec.sub(&m).max_abs() < 1e-11);
            let vtv = eig.vectors.transpose().matmul(&eig.vectors);
            assert!(vtv.sub(&Mat::identity(5)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn general_eigenvalues_of_rotation() {
        use libm::{cos, sin};
        let th = 1.0;
        let r = Mat::from_rows(&[&[cos(th), -sin(th)], &[sin(th), cos(th)]]);
        let mut eigs = eigenvalues(&r).unwrap();
        eigs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        assert!((eigs[0].0 - cos(th)).abs() < 1e-12);
        assert!((eigs[0].1 + sin(th)).abs() < 1e-12);
        assert!((eigs[1].1 - sin(th)).abs() < 1e-12);
    }

    #[test]
    fn general_eigenvalues_match_companion_roots() {
        // Companion matrix of (x-1)(x-2)(x-3)(x+0.5) =
        // x^4 - 5.5 x^3 + 8 x^2 - 0.5 x - 3.
        let c = Mat::from_rows(&[
            &[5.5, -8.0, 0.5, 3.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let eigs = eigenvalues(&c).unwrap();
        let mut res = sorted(eigs.iter().map(|&(re, _)| re).collect());
        for (got, want) in res.drain(..).zip([-0.5, 1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(eigs.iter().all(|&(_, im)| im.abs() < 1e-9));
    }

    #[test]
    fn general_agrees_with_jacobi_on_symmetric() {
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let m = random_symmetric(&mut rng, 4, 1.0);
            let gen = sorted(eigenvalues(&m).unwrap().iter().map(|&(re, _)| re).collect());
            let sym = sorted(sym_eigen(&m).values);
            for (a, b) in gen.iter().zip(&sym) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn eigenvalue_sum_is_trace() {
        let mut rng = Rng::new(23);
        for _ in 0..100 {
            let n = 2 + (rng.next_u64() % 5) as usize;
            let mut m = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = rng.next_f64() * 2.0 - 1.0;
                }
            }
            let eigs = eigenvalues(&m).unwrap();
            let sum_re: f64 = eigs.iter().map(|&(re, _)| re).sum();
            let sum_im: f64 = eigs.iter().map(|&(_, im)| im).sum();
            assert!((sum_re - m.trace()).abs() < 1e-9 * (1.0 + m.frob_norm()));
            assert!(sum_im.abs() < 1e-9);
        }
    }

    #[test]
    fn spd_sqrt_roundtrip() {
        let mut rng = Rng::new(31);
        for _ in 0..40 {
            let b = random_symmetric(&mut rng, 3, 1.0);
            let spd = b.matmul(&b.transpose()).add(&Mat::identity(3).scale(0.1));
            let root = spd_sqrt(&spd).unwrap();
            assert!(root.matmul(&root).sub(&spd).max_abs() < 1e-10);
            let inv_root = spd_inv_sqrt(&spd).unwrap();
            let prod = inv_root.matmul(&spd).matmul(&inv_root);
            assert!(prod.sub(&Mat::identity(3)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn defective_matrix_eigenvalues() {
        // Jordan block at 1: eigenvalues {1, 1}.
        let j = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let eigs = eigenvalues(&j).unwrap();
        for (re, im) in eigs {
            assert!((re - 1.0).abs() < 1e-7 && im.abs() < 1e-7);
        }
    }
}
