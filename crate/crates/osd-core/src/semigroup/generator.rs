//! Generator recovery: from sampled semigroup elements `C_w` to the matrix
//! `Q` with `C_w ~ exp(-w Q)`, certified against the membership oracle.

use alloc::vec::Vec;

use crate::linalg::{mat_exp, mat_log, min_real_eigenvalue, LinalgError, Mat};

use super::{gaussian_membership, GaussianLaw, SemigroupError};

/// Recovered generator with its spectral margin, per-`t` membership margins
/// of `exp(-tQ)` against the law, and the defect of the semigroup fit.
///
/// A positive spectral margin certifies `exp(-tQ) -> 0` as `t -> infinity`;
/// a large `consistency_residual` flags input data that is not actually a
/// one-parameter family (reported, not fatal).
#[derive(Debug, Clone)]
pub struct GeneratorCertificate {
    pub q: Mat,
    /// Smallest real part over the eigenvalues of `Q`.
    pub spectral_margin: f64,
    /// `(t, membership margin of exp(-tQ))` over the requested grid.
    pub membership_margins: Vec<(f64, f64)>,
    /// `max_w || exp(-w Q) - C_w ||_F` over the samples.
    pub consistency_residual: f64,
}

/// Averages `-(1/w) log C_w` over the samples and certifies the result.
///
/// Samples are `(w, C_w)` pairs with `w > 0`; at least two distinct `w`
/// values are required. Singular or non-principal-branch `C_w` is a
/// degenerate sample.
pub fn extract_generator(
    cw_samples: &[(f64, Mat)],
    law: &GaussianLaw,
    t_grid: &[f64],
) -> Result<GeneratorCertificate, SemigroupError> {
    let positive: Vec<&(f64, Mat)> = cw_samples
        .iter()
        .filter(|(w, _)| *w > 0.0 && w.is_finite())
        .collect();
    let mut distinct: Vec<f64> = positive.iter().map(|(w, _)| *w).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if distinct.len() < 2 {
        return Err(SemigroupError::TooFewSamples);
    }

    let d = positive[0].1.dim();
    let mut q_sum = Mat::zeros(d, d);
    for (w, c_w) in &positive {
        let log = mat_log(c_w).map_err(|e| match e {
            LinalgError::PrincipalBranch | LinalgError::Singular => {
                SemigroupError::DegenerateSample
            }
            other => SemigroupError::Linalg(other),
        })?;
        q_sum = q_sum.add(&log.scale(-1.0 / *w));
    }
    let q = q_sum.scale(1.0 / positive.len() as f64);

    let mut consistency_residual = 0.0f64;
    for (w, c_w) in &positive {
        let fitted = mat_exp(&q, -*w)?;
        consistency_residual = consistency_residual.max(fitted.sub(c_w).frob_norm());
    }

    let spectral_margin = min_real_eigenvalue(&q)?;
    let membership_margins = t_grid
        .iter()
        .map(|&t| {
            let a = mat_exp(&q, -t)?;
            Ok((t, gaussian_membership(law, &a, 1e-8).margin))
        })
        .collect::<Result<Vec<_>, SemigroupError>>()?;

    Ok(GeneratorCertificate {
        q,
        spectral_margin,
        membership_margins,
        consistency_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::exp;

    #[test]
    fn exact_scalar_family_recovers_identity() {
        let d = 2;
        let samples: Vec<(f64, Mat)> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&w| (w, Mat::identity(d).scale(exp(-w))))
            .collect();
        let law = GaussianLaw::standard(d);
        let cert = extract_generator(&samples, &law, &[0.5, 1.0]).unwrap();
        assert!(cert.q.sub(&Mat::identity(d)).max_abs() < 1e-10);
        assert!(cert.consistency_residual < 1e-10);
        assert!((cert.spectral_margin - 1.0).abs() < 1e-9);
        for &(_, margin) in &cert.membership_margins {
            assert!(margin >= 0.0);
        }
    }

    #[test]
    fn skew_perturbed_generator_roundtrip() {
        // C_w = exp(-w (I + S)) with S skew-symmetric: recovered to 1e-8.
        let s = Mat::from_rows(&[&[0.0, 0.4], &[-0.4, 0.0]]);
        let gen = Mat::identity(2).add(&s);
        let samples: Vec<(f64, Mat)> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&w| (w, mat_exp(&gen, -w).unwrap()))
            .collect();
        let law = GaussianLaw::standard(2);
        let cert = extract_generator(&samples, &law, &[0.25, 1.0, 4.0]).unwrap();
        assert!(
            cert.q.sub(&gen).max_abs() < 1e-8,
            "recovery defect {}",
            cert.q.sub(&gen).max_abs()
        );
        assert!(cert.consistency_residual < 1e-8);
        assert!(cert.spectral_margin > 0.9);
    }

    #[test]
    fn singular_sample_is_degenerate() {
        let samples = alloc::vec![
            (0.5, Mat::identity(2).scale(exp(-0.5))),
            (1.0, Mat::diag(&[0.0, 1.0])),
        ];
        let law = GaussianLaw::standard(2);
        assert_eq!(
            extract_generator(&samples, &law, &[1.0]).unwrap_err(),
            SemigroupError::DegenerateSample
        );
    }

    #[test]
    fn needs_two_distinct_weights() {
        let samples = alloc::vec![
            (1.0, Mat::identity(2).scale(exp(-1.0))),
            (1.0, Mat::identity(2).scale(exp(-1.0))),
        ];
        let law = GaussianLaw::standard(2);
        assert_eq!(
            extract_generator(&samples, &law, &[1.0]).unwrap_err(),
            SemigroupError::TooFewSamples
        );
    }

    #[test]
    fn certificate_margin_predicts_decay() {
        // spectral_margin > 0 implies exp(-tQ) -> 0; at T = 20/margin the
        // norm is far below 1e-6.
        let gen = Mat::from_rows(&[&[1.0, 0.3], &[0.0, 0.5]]);
        let samples: Vec<(f64, Mat)> = [0.5, 1.0]
            .iter()
            .map(|&w| (w, mat_exp(&gen, -w).unwrap()))
            .collect();
        let law = GaussianLaw::standard(2);
        let cert = extract_generator(&samples, &law, &[1.0]).unwrap();
        assert!(cert.spectral_margin > 0.0);
        let horizon = 20.0 / cert.spectral_margin;
        let tail = mat_exp(&cert.q, -horizon).unwrap();
        assert!(tail.op_norm() < 1e-6);
    }
}
