//! Partial-sum normalization harness: checkpointed sums, matrix
//! normalizers, frame regularization and the associated diagnostics.
//!
//! The harness realizes the normalized-sum scheme `A_n S_n + b_n` with
//! `A_n` the symmetric inverse square root of the empirical covariance of
//! `S_n`, so the normalized sums are exactly centered and whitened and the
//! limit target is the standard normal.

mod distance;
mod infinitesimal;

pub use distance::{
    cf_independence_residual, default_z_grid, empirical_cf, energy_distance,
    energy_permutation_band, gaussian_cf, limit_distance, CfIndependence, EnergyBand,
};
pub use infinitesimal::{
    block_sum_check, delta_schedule, infinitesimality_check, BlockSumAccumulator,
    BlockSumReport, DeltaSchedule, TailAccumulator, TailTable,
};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{polar_orthogonal, spd_inv_sqrt, LinalgError, Mat};
use crate::mixing::PathBatch;
use crate::semigroup::{symmetry_membership, GaussianLaw};

#[derive(Debug, Clone, PartialEq)]
pub enum CltError {
    Linalg(LinalgError),
    CheckpointOutOfRange { checkpoint: usize, length: usize },
    /// Empirical covariance of the sums is singular: the limit law cannot
    /// be full.
    DegenerateSums,
    /// Condition (A) fails within the observed horizon.
    NotInfinitesimal,
    InvalidSplit { m: usize, gap: usize, n: usize },
    TooFewReplicas,
    EmptyCheckpoints,
}

impl fmt::Display for CltError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CltError::Linalg(e) => write!(f, "{e}"),
            CltError::CheckpointOutOfRange { checkpoint, length } => {
                write!(f, "checkpoint {checkpoint} exceeds path length {length}")
            }
            CltError::DegenerateSums => write!(f, "degenerate sums; law not full"),
            CltError::NotInfinitesimal => write!(f, "not infinitesimal at horizon"),
            CltError::InvalidSplit { m, gap, n } => {
                write!(f, "invalid split: m={m}, gap={gap} must satisfy m+gap < n={n}")
            }
            CltError::TooFewReplicas => write!(f, "too few replicas for the estimator"),
            CltError::EmptyCheckpoints => write!(f, "checkpoint list is empty"),
        }
    }
}

impl core::error::Error for CltError {}

impl From<LinalgError> for CltError {
    fn from(e: LinalgError) -> Self {
        CltError::Linalg(e)
    }
}

/// A replicated set of d-dimensional vectors (row-major `replicas x dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    replicas: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(replicas: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), replicas * dim);
        Samples {
            replicas,
            dim,
            data,
        }
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in 0..self.replicas {
            for (i, x) in self.at(r).iter().enumerate() {
                m[i] += x;
            }
        }
        for v in m.iter_mut() {
            *v /= self.replicas as f64;
        }
        m
    }

    /// Sample covariance (divisor `R - 1`).
    pub fn covariance(&self) -> Mat {
        let m = self.mean();
        let mut cov = Mat::zeros(self.dim, self.dim);
        for r in 0..self.replicas {
            let x = self.at(r);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    cov[(i, j)] += (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        }
        cov.scale(1.0 / (self.replicas as f64 - 1.0))
    }

    /// Applies the affine map `x -> A x + b` to every row.
    pub fn affine(&self, a: &Mat, b: &[f64]) -> Samples {
        assert_eq!(a.dim(), self.dim);
        assert_eq!(b.len(), self.dim);
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.replicas {
            let x = self.at(r);
            let out = &mut data[r * self.dim..(r + 1) * self.dim];
            for i in 0..self.dim {
                let mut acc = b[i];
                for j in 0..self.dim {
                    acc += a[(i, j)] * x[j];
                }
                out[i] = acc;
            }
        }
        Samples::new(self.replicas, self.dim, data)
    }
}

/// Per-replica cumulative sums `S_n` at each requested checkpoint.
pub fn partial_sums(
    batch: &PathBatch,
    checkpoints: &[usize],
) -> Result<Vec<(usize, Samples)>, CltError> {
    validate_checkpoints(checkpoints, batch.length())?;
    let d = batch.dim();
    let r_total = batch.replicas();
    let mut out: Vec<(usize, Samples)> = checkpoints
        .iter()
        .map(|&n| (n, Samples::new(r_total, d, vec![0.0; r_total * d])))
        .collect();

    let mut acc = vec![0.0; d];
    for r in 0..r_total {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut next = 0usize;
        for t in 0..batch.length() {
            for (i, x) in batch.at(r, t).iter().enumerate() {
                acc[i] += x;
            }
            while next < checkpoints.len() && t + 1 == checkpoints[next] {
                let dst = &mut out[next].1;
                dst.data[r * d..(r + 1) * d].copy_from_slice(&acc);
                next += 1;
            }
            if next == checkpoints.len() {
                break;
            }
        }
    }
    Ok(out)
}

fn validate_checkpoints(checkpoints: &[usize], length: usize) -> Result<(), CltError> {
    if checkpoints.is_empty() {
        return Err(CltError::EmptyCheckpoints);
    }
    for (i, &n) in checkpoints.iter().enumerate() {
        if n == 0 || n > length {
            return Err(CltError::CheckpointOutOfRange {
                checkpoint: n,
                length,
            });
        }
        if i > 0 && checkpoints[i - 1] >= n {
            return Err(CltError::CheckpointOutOfRange {
                checkpoint: n,
                length,
            });
        }
    }
    Ok(())
}

/// Affine normalizer track: `A_n` (invertible) and shift `b_n` per
/// checkpoint, with `A_n S_n + b_n` exactly centered and whitened.
#[derive(Debug, Clone)]
pub struct NormalizerTrack {
    checkpoints: Vec<usize>,
    a: Vec<Mat>,
    b: Vec<Vec<f64>>,
    regularized: bool,
}

impl NormalizerTrack {
    pub fn from_parts(checkpoints: Vec<usize>, a: Vec<Mat>, b: Vec<Vec<f64>>) -> Self {
        assert_eq!(checkpoints.len(), a.len());
        assert_eq!(checkpoints.len(), b.len());
        NormalizerTrack {
            checkpoints,
            a,
            b,
            regularized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn a(&self, idx: usize) -> &Mat {
        &self.a[idx]
    }

    pub fn b(&self, idx: usize) -> &[f64] {
        &self.b[idx]
    }

    pub fn normalizers(&self) -> &[Mat] {
        &self.a
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn index_of(&self, n: usize) -> Option<usize> {
        self.checkpoints.iter().position(|&c| c == n)
    }
}

fn normalizer_from_moments(mean: &[f64], cov: &Mat) -> Result<(Mat, Vec<f64>), CltError> {
    let a = spd_inv_sqrt(cov).map_err(|e| match e {
        LinalgError::Singular => CltError::DegenerateSums,
        other => CltError::Linalg(other),
    })?;
    let mut b = a.matvec(mean);
    for v in b.iter_mut() {
        *v = -*v;
    }
    Ok((a, b))
}

/// `A_n = Cov(S_n)^{-1/2}` (symmetric psd inverse square root) and
/// `b_n = -A_n mean(S_n)` from checkpointed sums.
pub fn choose_normalizers(sums: &[(usize, Samples)]) -> Result<NormalizerTrack, CltError> {
    if sums.is_empty() {
        return Err(CltError::EmptyCheckpoints);
    }
    if sums[0].1.replicas() < 2 {
        return Err(CltError::TooFewReplicas);
    }
    let mut checkpoints = Vec::with_capacity(sums.len());
    let mut a_list = Vec::with_capacity(sums.len());
    let mut b_list = Vec::with_capacity(sums.len());
    for (n, samples) in sums {
        let (a, b) = normalizer_from_moments(&samples.mean(), &samples.covariance())?;
        checkpoints.push(*n);
        a_list.push(a);
        b_list.push(b);
    }
    Ok(NormalizerTrack::from_parts(checkpoints, a_list, b_list))
}

/// Streaming accumulator for the first and second moments of `S_n` at a
/// checkpoint grid: absorbs replica chunks without storing the sums, so
/// dense grids and out-of-core batches stay cheap.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    checkpoints: Vec<usize>,
    dim: usize,
    replicas: usize,
    sum1: Vec<f64>,
    sum2: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(checkpoints: &[usize], dim: usize) -> Result<Self, CltError> {
        validate_checkpoints(checkpoints, usize::MAX)?;
        Ok(MomentAccumulator {
            checkpoints: checkpoints.to_vec(),
            dim,
            replicas: 0,
            sum1: vec![0.0; checkpoints.len() * dim],
            sum2: vec![0.0; checkpoints.len() * dim * dim],
        })
    }

    pub fn absorb(&mut self, batch: &PathBatch) -> Result<(), CltError> {
        let d = self.dim;
        assert_eq!(batch.dim(), d, "batch dimension mismatch");
        let k = self.checkpoints.len();
        if *self.checkpoints.last().unwrap() > batch.length() {
            return Err(CltError::CheckpointOutOfRange {
                checkpoint: *self.checkpoints.last().unwrap(),
                length: batch.length(),
            });
        }
        let mut acc = vec![0.0; d];
        for r in 0..batch.replicas() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut next = 0usize;
            for t in 0..batch.length() {
                for (i, x) in batch.at(r, t).iter().enumerate() {
                    acc[i] += x;
                }
                while next < k && t + 1 == self.checkpoints[next] {
                    for i in 0..d {
                        self.sum1[next * d + i] += acc[i];
                        for j in 0..d {
                            self.sum2[(next * d + i) * d + j] += acc[i] * acc[j];
                        }
                    }
                    next += 1;
                }
                if next == k {
                    break;
                }
            }
        }
        self.replicas += batch.replicas();
        Ok(())
    }

    pub fn finish(&self) -> Result<NormalizerTrack, CltError> {
        if self.replicas < 2 {
            return Err(CltError::TooFewReplicas);
        }
        let d = self.dim;
        let r_total = self.replicas as f64;
        let mut a_list = Vec::with_capacity(self.checkpoints.len());
        let mut b_list = Vec::with_capacity(self.checkpoints.len());
        for c in 0..self.checkpoints.len() {
            let mean: Vec<f64> = (0..d).map(|i| self.sum1[c * d + i] / r_total).collect();
            let mut cov = Mat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let raw = self.sum2[(c * d + i) * d + j];
                    cov[(i, j)] = (raw - r_total * mean[i] * mean[j]) / (r_total - 1.0);
                }
            }
            let (a, b) = normalizer_from_moments(&mean, &cov.symmetrize())?;
            a_list.push(a);
            b_list.push(b);
        }
        Ok(NormalizerTrack::from_parts(
            self.checkpoints.clone(),
            a_list,
            b_list,
        ))
    }
}

/// Streaming variant of [`choose_normalizers`] on a single batch.
pub fn normalizer_track_from_batch(
    batch: &PathBatch,
    checkpoints: &[usize],
) -> Result<NormalizerTrack, CltError> {
    validate_checkpoints(checkpoints, batch.length())?;
    let mut acc = MomentAccumulator::new(checkpoints, batch.dim())?;
    acc.absorb(batch)?;
    acc.finish()
}

/// Replaces each `A_n` by `H_n A_n` with `H_n` orthogonal (hence a symmetry
/// of the whitened target law), chosen recursively so successive ratios
/// approach the identity: `H` is the transposed orthogonal polar factor of
/// `A_{k+1} A~_k^{-1}`, the Frobenius-optimal alignment.
pub fn regularize_normalizers(
    track: &NormalizerTrack,
    law: &GaussianLaw,
) -> Result<NormalizerTrack, CltError> {
    let mut a_out: Vec<Mat> = Vec::with_capacity(track.len());
    let mut b_out: Vec<Vec<f64>> = Vec::with_capacity(track.len());

    for idx in 0..track.len() {
        if idx == 0 {
            a_out.push(track.a(0).clone());
            b_out.push(track.b(0).to_vec());
            continue;
        }
        let prev_inv = a_out[idx - 1].inverse()?;
        let ratio = track.a(idx).matmul(&prev_inv);
        let h = match polar_orthogonal(&ratio) {
            Ok(u) => u.transpose(),
            Err(_) => Mat::identity(track.a(idx).dim()),
        };
        // Only legitimate frame changes are allowed: H must be a symmetry
        // of the target law (always true for orthogonal H and N(0, I)).
        let h = if symmetry_membership(law, &h, 1e-6) {
            h
        } else {
            Mat::identity(track.a(idx).dim())
        };
        a_out.push(h.matmul(track.a(idx)));
        b_out.push(h.matvec(track.b(idx)));
    }

    Ok(NormalizerTrack {
        checkpoints: track.checkpoints.clone(),
        a: a_out,
        b: b_out,
        regularized: true,
    })
}

/// Trend diagnostics over a normalizer track.
#[derive(Debug, Clone)]
pub struct NormalizerDiagnostics {
    /// `||A_n||` per checkpoint.
    pub norms: Vec<f64>,
    /// Per consecutive pair: `|det A_{k+1} / det A_k|^{1 / (n_{k+1} - n_k)}`,
    /// the spacing-adjusted determinant ratio that tends to one.
    pub det_ratios_adjusted: Vec<f64>,
    /// `max ||A_n A_m^{-1}||` over checkpoint pairs `m <= n`.
    pub ratio_bound: f64,
    pub norms_decreasing: bool,
    pub det_ratios_near_one: bool,
}

impl NormalizerDiagnostics {
    pub fn flagged(&self) -> bool {
        !self.norms_decreasing || !self.det_ratios_near_one
    }
}

pub fn normalizer_diagnostics(track: &NormalizerTrack) -> Result<NormalizerDiagnostics, CltError> {
    let k = track.len();
    let norms: Vec<f64> = (0..k).map(|i| track.a(i).op_norm()).collect();
    let norms_decreasing = norms.windows(2).all(|w| w[1] <= w[0] * 1.01);

    let mut det_ratios_adjusted = Vec::new();
    for i in 0..k.saturating_sub(1) {
        let d0 = track.a(i).det()?;
        let d1 = track.a(i + 1).det()?;
        let gap = (track.checkpoints[i + 1] - track.checkpoints[i]) as f64;
        let raw = libm::fabs(d1 / d0);
        det_ratios_adjusted.push(libm::pow(raw, 1.0 / gap));
    }
    let det_ratios_near_one = match (det_ratios_adjusted.first(), det_ratios_adjusted.last()) {
        (Some(&first), Some(&last)) => {
            let first_gap = libm::fabs(first - 1.0);
            let last_gap = libm::fabs(last - 1.0);
            last_gap <= (1.5 * first_gap).max(0.01)
        }
        _ => true,
    };

    let mut ratio_bound = 0.0f64;
    let inverses: Vec<Mat> = (0..k)
        .map(|i| track.a(i).inverse())
        .collect::<Result<_, _>>()?;
    for (m, inv) in inverses.iter().enumerate() {
        for n in m..k {
            let norm = track.a(n).matmul(inv).op_norm();
            if norm > ratio_bound {
                ratio_bound = norm;
            }
        }
    }

    Ok(NormalizerDiagnostics {
        norms,
        det_ratios_adjusted,
        ratio_bound,
        norms_decreasing,
        det_ratios_near_one,
    })
}
