//! Numerical machinery for operator-selfdecomposable limit laws of strongly
//! mixing sequences.
//!
//! The crate provides, in dependency order:
//!
//! * [`linalg`] — dense small-dimension matrix algebra: exponentials,
//!   principal logarithms, subspace determinants, idempotent calculus and
//!   eigenvalue routines;
//! * [`semigroup`] — decomposability-semigroup machinery over full Gaussian
//!   laws: membership oracles, Numakura kernel extraction, the `K_c` / `C_w`
//!   constructions and generator recovery;
//! * [`mixing`] — generators for strongly mixing vector sequences and an
//!   empirical lower-bound estimator of the mixing coefficient `alpha(n)`;
//! * [`clt`] — the partial-sum harness: matrix normalizers, infinitesimality
//!   and block-sum diagnostics, and convergence metrics to the limit law;
//! * [`bdlp`] — the random-integral representation: Levy-driven operator
//!   Ornstein-Uhlenbeck stepping and the selfdecomposability factorization
//!   check.
//!
//! Everything is `no_std` + `alloc`; IO, file formats and the command line
//! front end live in the companion `osd-cli` crate.

#![no_std]

extern crate alloc;

pub mod bdlp;
pub mod clt;
pub mod linalg;
pub mod mixing;
pub mod rng;
pub mod semigroup;

pub use linalg::Mat;
pub use semigroup::GaussianLaw;
