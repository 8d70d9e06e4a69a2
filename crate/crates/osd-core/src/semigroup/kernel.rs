//! Numakura kernel extraction for monothetic matrix semigroups.
//!
//! For a matrix `T` with bounded powers, the closure of `{T^k}` is a compact
//! semigroup whose limit points form a group; the unit of that group is the
//! spectral projector onto the peripheral part of the spectrum (eigenvalue
//! modulus 1 within tolerance), acting as the identity there and as zero
//! along the complementary invariant subspace.

use libm::hypot;

use crate::linalg::{eigenvalues, sign_projector, Idempotent, Mat};

use super::SemigroupError;

/// Unit idempotent of the kernel group of `sem(T)`.
#[derive(Debug, Clone)]
pub struct KernelResult {
    pub unit: Idempotent,
    pub converged: bool,
    pub iterations: usize,
}

/// Extracts the kernel unit of the monothetic semigroup generated by `T`.
///
/// Power boundedness is a precondition; it is monitored by iterating powers
/// (growth past the transient, or past `1e8` in norm, is reported as not
/// conditionally compact). The unit itself is computed spectrally: zero when
/// the whole spectrum is inside the unit circle, identity when all of it is
/// peripheral, and a sign-function projector for the mixed case.
pub fn numakura_kernel(t: &Mat, tol: f64, max_iter: usize) -> Result<KernelResult, SemigroupError> {
    assert!(tol > 0.0);
    let d = t.dim();
    if !t.is_finite() {
        return Err(SemigroupError::NotConditionallyCompact);
    }

    let moduli: alloc::vec::Vec<f64> = eigenvalues(t)?
        .iter()
        .map(|&(re, im)| hypot(re, im))
        .collect();
    if moduli.iter().any(|&m| m > 1.0 + tol) {
        return Err(SemigroupError::NotConditionallyCompact);
    }
    let peripheral = moduli.iter().filter(|&&m| m >= 1.0 - tol).count();

    // Monitor powers: bounded spectra can still produce unbounded powers
    // (defective peripheral eigenvalues), which show up as sustained norm
    // growth past the nonnormal transient.
    let monitor_budget = max_iter.clamp(1, 4096);
    let mut power = t.clone();
    let mut iterations = 1usize;
    let mut early_norm = power.frob_norm();
    let mut decayed_at: Option<usize> = None;
    for k in 2..=monitor_budget {
        power = power.matmul(t);
        iterations = k;
        let norm = power.frob_norm();
        if !norm.is_finite() || norm > 1e8 {
            return Err(SemigroupError::NotConditionallyCompact);
        }
        if k == 16 {
            early_norm = norm.max(early_norm);
        }
        if norm <= tol && decayed_at.is_none() {
            decayed_at = Some(k);
            if peripheral == 0 {
                break;
            }
        }
    }
    if peripheral > 0 && iterations >= 17 {
        let final_norm = power.frob_norm();
        if final_norm > 10.0 * early_norm.max(1.0) {
            return Err(SemigroupError::NotConditionallyCompact);
        }
    }

    let (unit_mat, converged) = if peripheral == 0 {
        // Kernel group is {0}; converged once the powers actually fell
        // below tolerance inside the budget.
        (Mat::zeros(d, d), decayed_at.is_some())
    } else if peripheral == d {
        (Mat::identity(d), true)
    } else {
        let max_inner = moduli
            .iter()
            .filter(|&&m| m < 1.0 - tol)
            .fold(0.0f64, |a, &b| a.max(b));
        let radius = 0.5 * (max_inner + 1.0 - tol);
        (sign_projector(t, radius)?, true)
    };

    let defect = unit_mat.matmul(&unit_mat).sub(&unit_mat).op_norm();
    let unit = Idempotent::new(unit_mat, tol.max(4.0 * defect))?;
    Ok(KernelResult {
        unit,
        converged: converged && defect <= tol,
        iterations,
    })
}
