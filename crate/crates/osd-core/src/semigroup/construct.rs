//! Constructive semigroup elements: `K_c` extraction from normalizer
//! ratios, contractions approaching an idempotent, the primitive idempotent
//! decomposition, and the rational one-parameter family `C_w`.

use alloc::vec::Vec;

use libm::{floor, log};

use crate::linalg::{
    det_sub, spd_inv_sqrt, spd_sqrt, Idempotent, Mat, DEFAULT_TOL,
};

use super::{gaussian_membership, GaussianLaw, SemigroupError};

/// `K_c = A_{m_n} A_n^{-1}` with `det_J K_c` as close to `c` as the
/// normalizer horizon allows.
///
/// With `b_{m,n} = det_J(A_m A_n^{-1})` (so `b_{n,n} = 1`), the crossing
/// index is `m_n = sup{k >= n : b_{k,n} >= c}`. The ratio sequence must
/// actually cross below `c` before the list ends; otherwise the horizon is
/// insufficient and finite data cannot bracket the limit point.
pub fn extract_kc(
    normalizers: &[Mat],
    j: &Idempotent,
    c: f64,
    n_index: usize,
) -> Result<Mat, SemigroupError> {
    if !(c > 0.0 && c < 1.0) {
        return Err(SemigroupError::ContractionOutOfRange { c });
    }
    if n_index >= normalizers.len() {
        return Err(SemigroupError::IndexOutOfRange);
    }
    let a_n_inv = normalizers[n_index].inverse()?;

    let mut m_n = None;
    let mut b_last = 1.0;
    for (offset, a_m) in normalizers[n_index..].iter().enumerate() {
        let ratio = a_m.matmul(&a_n_inv);
        let b = det_sub(j, &ratio)?;
        if b >= c {
            m_n = Some(n_index + offset);
        }
        b_last = b;
    }
    // The sup must be interior: if even the last ratio stays >= c the
    // crossing lies beyond the data.
    if b_last >= c {
        return Err(SemigroupError::InsufficientHorizon);
    }
    let m_n = m_n.ok_or(SemigroupError::InsufficientHorizon)?;
    Ok(normalizers[m_n].matmul(&a_n_inv))
}

/// Contraction `T_n = s J` approaching the idempotent `J` from inside the
/// semigroup: `s` is the largest scalar `<= 1 - 1/n` accepted by the
/// membership oracle (bisection; the margin is monotone in `s`).
pub fn approach_idempotent(
    law: &GaussianLaw,
    j: &Idempotent,
    n: usize,
) -> Result<Mat, SemigroupError> {
    assert!(n >= 1, "approximation index must be >= 1");
    let tol = DEFAULT_TOL;
    let base = gaussian_membership(law, j.mat(), tol);
    if !base.member {
        return Err(SemigroupError::NotMember { margin: base.margin });
    }

    let s_max = 1.0 - 1.0 / n as f64;
    let member = |s: f64| gaussian_membership(law, &j.mat().scale(s), tol).member;
    if member(s_max) {
        return Ok(j.mat().scale(s_max));
    }
    // The scalar zero is always accepted; bisect toward the boundary.
    let mut lo = 0.0;
    let mut hi = s_max;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if member(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(j.mat().scale(lo))
}

/// Primitive idempotent decomposition `I = J_1 + ... + J_q` with pairwise
/// zero products, all members of `D(law)`.
///
/// For a whitened law these are the rank-one coordinate projections
/// (`q = d`); a general covariance conjugates them back by its symmetric
/// square root, which keeps them members. Rank-one idempotents are
/// automatically primitive.
pub fn primitive_decomposition(law: &GaussianLaw) -> Result<Vec<Idempotent>, SemigroupError> {
    let d = law.dim();
    let w = spd_sqrt(law.cov())?;
    let w_inv = spd_inv_sqrt(law.cov())?;
    let mut out = Vec::with_capacity(d);
    for r in 0..d {
        let mut e = Mat::zeros(d, d);
        e[(r, r)] = 1.0;
        let j = w.matmul(&e).matmul(&w_inv);
        out.push(Idempotent::new(j, DEFAULT_TOL)?);
    }
    Ok(out)
}

/// One element of the rational semigroup:
/// `C_w = sum_r J_r T_r^{floor(w d(r))} J_r` with
/// `d(r) = floor(1 / (-log det_{J_r} T_r))`.
///
/// Requires `0 < det_{J_r} T_r < 1` for every block and `w >= 0`; `w = 0`
/// returns the identity exactly. As the contractions approach their
/// idempotents the determinant of `C_w` tends to `e^{-qw}`.
pub fn build_cw(pairs: &[(Idempotent, Mat)], w: f64) -> Result<Mat, SemigroupError> {
    assert!(!pairs.is_empty(), "need at least one (J, T) pair");
    if w.is_nan() || w < 0.0 || !w.is_finite() {
        return Err(SemigroupError::NegativeWeight { w });
    }
    let d = pairs[0].0.dim();
    if w == 0.0 {
        return Ok(Mat::identity(d));
    }

    let mut sum = Mat::zeros(d, d);
    for (j_r, t_r) in pairs {
        let det = det_sub(j_r, t_r)?;
        if !(det > 0.0 && det < 1.0) {
            return Err(SemigroupError::DetOutOfRange { value: det });
        }
        let steps = floor(1.0 / -log(det));
        let k = floor(w * steps) as u64;
        let powered = t_r.powi(k);
        sum = sum.add(&j_r.mat().matmul(&powered).matmul(j_r.mat()));
    }
    Ok(sum)
}

/// `floor(a + b) - floor(a) - floor(b)`, always 0 or 1.
pub fn integer_part_gap(a: f64, b: f64) -> i64 {
    assert!(a.is_finite() && b.is_finite());
    (floor(a + b) - floor(a) - floor(b)) as i64
}
