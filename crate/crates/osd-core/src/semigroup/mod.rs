//! Decomposability-semigroup machinery over full Gaussian laws.
//!
//! For a full law `mu` the decomposability semigroup `D(mu)` consists of all
//! matrices `A` with `X = A X' + Y` in distribution for some residual `Y`
//! independent of `X' ~ mu`; the symmetry group `A(mu)` requires the residual
//! to be a constant vector. Gaussian laws admit closed-form membership
//! oracles: `A` is in `D(mu)` iff `cov - A cov A^T` is positive semidefinite,
//! and the residual is again Gaussian.
//!
//! The submodules provide the constructive content on top of the oracle:
//! Numakura kernel extraction ([`numakura_kernel`]), the `K_c` / `T_n` /
//! `C_w` constructions ([`extract_kc`], [`approach_idempotent`],
//! [`build_cw`]) and generator recovery ([`extract_generator`]).

mod construct;
mod generator;
mod kernel;

pub use construct::{
    approach_idempotent, build_cw, extract_kc, integer_part_gap, primitive_decomposition,
};
pub use generator::{extract_generator, GeneratorCertificate};
pub use kernel::{numakura_kernel, KernelResult};

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{psd_margin, Idempotent, LinalgError, Mat};

#[derive(Debug, Clone, PartialEq)]
pub enum SemigroupError {
    Linalg(LinalgError),
    /// Covariance is not symmetric positive-definite: the law is not full.
    NotFull { margin: f64 },
    NotSymmetric { defect: f64 },
    /// The idempotent is not a member of the decomposability semigroup.
    NotMember { margin: f64 },
    /// Powers of the matrix are unbounded; its monothetic semigroup is not
    /// conditionally compact.
    NotConditionallyCompact,
    /// `c` must lie strictly inside (0, 1).
    ContractionOutOfRange { c: f64 },
    /// The normalizer sequence ends before the `b_{m,n} >= c` crossing.
    InsufficientHorizon,
    /// Base index beyond the available normalizer sequence.
    IndexOutOfRange,
    /// `det_J T` must lie strictly inside (0, 1).
    DetOutOfRange { value: f64 },
    NegativeWeight { w: f64 },
    /// A sampled semigroup element was singular or off the principal branch.
    DegenerateSample,
    /// Generator recovery needs at least two distinct positive `w` values.
    TooFewSamples,
}

impl fmt::Display for SemigroupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemigroupError::Linalg(e) => write!(f, "{e}"),
            SemigroupError::NotFull { margin } => {
                write!(f, "law not full (psd margin {margin:e})")
            }
            SemigroupError::NotSymmetric { defect } => {
                write!(f, "covariance not symmetric (defect {defect:e})")
            }
            SemigroupError::NotMember { margin } => {
                write!(
                    f,
                    "idempotent not in the decomposability semigroup (margin {margin:e})"
                )
            }
            SemigroupError::NotConditionallyCompact => {
                write!(f, "not conditionally compact: matrix powers unbounded")
            }
            SemigroupError::ContractionOutOfRange { c } => {
                write!(f, "c = {c} outside (0, 1)")
            }
            SemigroupError::InsufficientHorizon => {
                write!(f, "insufficient normalizer horizon")
            }
            SemigroupError::IndexOutOfRange => write!(f, "normalizer index out of range"),
            SemigroupError::DetOutOfRange { value } => {
                write!(f, "det_J T = {value} outside (0, 1)")
            }
            SemigroupError::NegativeWeight { w } => write!(f, "negative weight w = {w}"),
            SemigroupError::DegenerateSample => write!(f, "degenerate semigroup sample"),
            SemigroupError::TooFewSamples => {
                write!(f, "need at least two distinct w samples")
            }
        }
    }
}

impl core::error::Error for SemigroupError {}

impl From<LinalgError> for SemigroupError {
    fn from(e: LinalgError) -> Self {
        SemigroupError::Linalg(e)
    }
}

/// Full (genuinely d-dimensional) Gaussian law: mean vector plus symmetric
/// positive-definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianLaw {
    mean: Vec<f64>,
    cov: Mat,
}

impl GaussianLaw {
    pub fn new(mean: Vec<f64>, cov: Mat) -> Result<Self, SemigroupError> {
        if !cov.is_square() || cov.dim() != mean.len() {
            return Err(SemigroupError::Linalg(LinalgError::DimMismatch));
        }
        let defect = cov.sub(&cov.transpose()).max_abs();
        if defect > 1e-12 * cov.max_abs().max(1.0) {
            return Err(SemigroupError::NotSymmetric { defect });
        }
        let margin = psd_margin(&cov);
        if margin <= 0.0 {
            return Err(SemigroupError::NotFull { margin });
        }
        Ok(GaussianLaw { mean, cov })
    }

    /// Standard normal `N(0, I_d)`.
    pub fn standard(dim: usize) -> Self {
        GaussianLaw {
            mean: alloc::vec![0.0; dim],
            cov: Mat::identity(dim),
        }
    }

    pub fn centered(cov: Mat) -> Result<Self, SemigroupError> {
        let d = cov.dim();
        GaussianLaw::new(alloc::vec![0.0; d], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }
}

/// Outcome of the Gaussian membership oracle for `A` in `D(law)`.
///
/// When `member` holds, the residual fields are the law of `Y` in
/// `X = A X' + Y`: `residual_cov = cov - A cov A^T` and
/// `residual_mean = (I - A) mean`.
#[derive(Debug, Clone)]
pub struct MembershipResult {
    pub member: bool,
    /// Smallest eigenvalue of the residual covariance.
    pub margin: f64,
    pub residual_mean: Vec<f64>,
    pub residual_cov: Mat,
}

/// Membership oracle for `D(law)`: member iff `cov - A cov A^T` is positive
/// semidefinite within `tol`.
pub fn gaussian_membership(law: &GaussianLaw, a: &Mat, tol: f64) -> MembershipResult {
    let d = law.dim();
    assert_eq!(a.dim(), d, "operator dimension mismatch");
    let residual_cov = law
        .cov
        .sub(&a.matmul(&law.cov).matmul(&a.transpose()))
        .symmetrize();
    let margin = psd_margin(&residual_cov);
    let i_minus_a = Mat::identity(d).sub(a);
    let residual_mean = i_minus_a.matvec(&law.mean);
    MembershipResult {
        member: margin >= -tol,
        margin,
        residual_mean,
        residual_cov,
    }
}

/// Symmetry-group oracle for `A(law)` on centered Gaussian laws: `A` is a
/// symmetry iff it preserves the covariance, `A cov A^T = cov`.
pub fn symmetry_membership(law: &GaussianLaw, a: &Mat, tol: f64) -> bool {
    let residual = law.cov.sub(&a.matmul(&law.cov).matmul(&a.transpose()));
    residual.frob_norm() <= tol
}

/// Covariance-level check of the idempotent factorization
/// `mu = J mu * (I-J) mu`, exact for Gaussian laws:
/// `cov = J cov J^T + (I-J) cov (I-J)^T` within `tol`.
pub fn check_idempotent_factorization(law: &GaussianLaw, j: &Idempotent, tol: f64) -> bool {
    let d = law.dim();
    let jm = j.mat();
    let jc = Mat::identity(d).sub(jm);
    let split = jm
        .matmul(&law.cov)
        .matmul(&jm.transpose())
        .add(&jc.matmul(&law.cov).matmul(&jc.transpose()));
    law.cov.sub(&split).frob_norm() <= tol
}
