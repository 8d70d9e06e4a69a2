//! Convergence metrics to the limit law: energy distance with a permutation
//! null, characteristic-function sup-distance, and the empirical
//! characteristic-function independence residual with its mixing bound.

use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, exp, hypot, sin, sqrt};

use crate::linalg::{dot, spd_sqrt};
use crate::mixing::{alpha_estimate_default, PathBatch};
use crate::rng::Rng;
use crate::semigroup::GaussianLaw;

use super::{CltError, NormalizerTrack, Samples};

/// Characteristic function of a Gaussian law at `z`:
/// `exp(i <z, mean> - <z, cov z> / 2)` as `(re, im)`.
pub fn gaussian_cf(law: &GaussianLaw, z: &[f64]) -> (f64, f64) {
    let quad = dot(z, &law.cov().matvec(z));
    let amp = exp(-0.5 * quad);
    let phase = dot(z, law.mean());
    (amp * cos(phase), amp * sin(phase))
}

/// Empirical characteristic function of a sample set at `z`.
pub fn empirical_cf(samples: &Samples, z: &[f64]) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for r in 0..samples.replicas() {
        let phase = dot(z, samples.at(r));
        re += cos(phase);
        im += sin(phase);
    }
    let n = samples.replicas() as f64;
    (re / n, im / n)
}

/// Energy distance statistic `2 E|X-Y| - E|X-X'| - E|Y-Y'|`.
pub fn energy_distance(x: &Samples, y: &Samples) -> f64 {
    assert_eq!(x.dim(), y.dim());
    let nx = x.replicas();
    let ny = y.replicas();
    assert!(nx > 1 && ny > 1);

    let dist = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            s += d * d;
        }
        sqrt(s)
    };

    let mut xy = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            xy += dist(x.at(i), y.at(j));
        }
    }
    let mut xx = 0.0;
    for i in 0..nx {
        for j in i + 1..nx {
            xx += dist(x.at(i), x.at(j));
        }
    }
    let mut yy = 0.0;
    for i in 0..ny {
        for j in i + 1..ny {
            yy += dist(y.at(i), y.at(j));
        }
    }
    2.0 * xy / (nx as f64 * ny as f64) - 2.0 * xx / (nx as f64 * (nx as f64 - 1.0))
        - 2.0 * yy / (ny as f64 * (ny as f64 - 1.0))
}

fn draw_from_law(law: &GaussianLaw, count: usize, rng: &mut Rng) -> Samples {
    let d = law.dim();
    let factor = spd_sqrt(law.cov()).expect("law covariance is spd");
    let mut data = vec![0.0; count * d];
    let mut z = vec![0.0; d];
    for r in 0..count {
        for zi in z.iter_mut() {
            *zi = rng.next_normal();
        }
        for i in 0..d {
            let mut acc = law.mean()[i];
            for j in 0..d {
                acc += factor[(i, j)] * z[j];
            }
            data[r * d + i] = acc;
        }
    }
    Samples::new(count, d, data)
}

fn even_stride_subsample(samples: &Samples, cap: usize) -> Samples {
    let n = samples.replicas();
    if n <= cap {
        return samples.clone();
    }
    let d = samples.dim();
    let mut data = Vec::with_capacity(cap * d);
    for k in 0..cap {
        let idx = k * n / cap;
        data.extend_from_slice(samples.at(idx));
    }
    Samples::new(cap, d, data)
}

/// Distance of a sample cloud to a Gaussian law: the energy distance to
/// fresh draws (even-stride subsample capped at 4096 on each side) plus the
/// characteristic-function sup-distance over `cf_grid` (full sample).
pub fn limit_distance(
    samples: &Samples,
    law: &GaussianLaw,
    cf_grid: &[Vec<f64>],
    seed: u64,
) -> (f64, f64) {
    let sub = even_stride_subsample(samples, 4096);
    let mut rng = Rng::stream(seed, 0xE4E7);
    let fresh = draw_from_law(law, sub.replicas(), &mut rng);
    let energy = energy_distance(&sub, &fresh);

    let mut cf_sup = 0.0f64;
    for z in cf_grid {
        let (er, ei) = empirical_cf(samples, z);
        let (gr, gi) = gaussian_cf(law, z);
        let d = hypot(er - gr, ei - gi);
        if d > cf_sup {
            cf_sup = d;
        }
    }
    (energy, cf_sup)
}

/// Permutation-calibrated energy test of `samples` against `law`.
#[derive(Debug, Clone)]
pub struct EnergyBand {
    pub statistic: f64,
    pub lower: f64,
    pub upper: f64,
    pub permutations: usize,
}

impl EnergyBand {
    pub fn within(&self) -> bool {
        self.statistic >= self.lower && self.statistic <= self.upper
    }
}

/// Energy statistic against fresh draws plus its permutation null band
/// (central 95%), both on an even-stride subsample of at most `subsample`
/// points per side so the null recomputation stays cheap.
pub fn energy_permutation_band(
    samples: &Samples,
    law: &GaussianLaw,
    permutations: usize,
    subsample: usize,
    seed: u64,
) -> EnergyBand {
    let sub = even_stride_subsample(samples, subsample);
    let m = sub.replicas();
    let d = sub.dim();
    let mut rng = Rng::stream(seed, 0xBA4D);
    let fresh = draw_from_law(law, m, &mut rng);

    // Pooled distance matrix once; every permutation just re-partitions.
    let total = 2 * m;
    let mut pooled = Vec::with_capacity(total * d);
    pooled.extend_from_slice(sub.data());
    pooled.extend_from_slice(fresh.data());
    let point = |i: usize| -> &[f64] { &pooled[i * d..(i + 1) * d] };
    let mut dist = vec![0.0f64; total * total];
    for i in 0..total {
        for j in i + 1..total {
            let a = point(i);
            let b = point(j);
            let mut s = 0.0;
            for k in 0..d {
                let diff = a[k] - b[k];
                s += diff * diff;
            }
            let v = sqrt(s);
            dist[i * total + j] = v;
            dist[j * total + i] = v;
        }
    }

    let stat_for = |labels: &[usize]| -> f64 {
        // labels lists the indices assigned to the X side.
        let mut in_x = vec![false; total];
        for &i in labels {
            in_x[i] = true;
        }
        let mut xy = 0.0;
        let mut xx = 0.0;
        let mut yy = 0.0;
        for i in 0..total {
            for j in i + 1..total {
                let v = dist[i * total + j];
                match (in_x[i], in_x[j]) {
                    (true, true) => xx += v,
                    (false, false) => yy += v,
                    _ => xy += v,
                }
            }
        }
        let mf = m as f64;
        2.0 * xy / (mf * mf) - 2.0 * xx / (mf * (mf - 1.0)) - 2.0 * yy / (mf * (mf - 1.0))
    };

    let observed = stat_for(&(0..m).collect::<Vec<_>>());
    let mut null: Vec<f64> = Vec::with_capacity(permutations);
    let mut indices: Vec<usize> = (0..total).collect();
    for _ in 0..permutations {
        // Fisher-Yates with the deterministic stream.
        for i in (1..total).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            indices.swap(i, j);
        }
        null.push(stat_for(&indices[..m]));
    }
    null.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        let idx = ((null.len() as f64 - 1.0) * q) as usize;
        null[idx]
    };
    EnergyBand {
        statistic: observed,
        lower: quantile(0.025),
        upper: quantile(0.975),
        permutations,
    }
}

/// Deterministic z-grid: fixed directions scaled by a small radius ladder.
pub fn default_z_grid(dim: usize, directions: usize, radii: &[f64]) -> Vec<Vec<f64>> {
    let mut rng = Rng::stream(0x26D5_CA1E_0002_714D, dim as u64);
    let mut out = Vec::new();
    let mut dirs = Vec::new();
    while dirs.len() < directions {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let norm = crate::linalg::norm2(&u);
        if norm < 1e-9 {
            continue;
        }
        for ui in u.iter_mut() {
            *ui /= norm;
        }
        dirs.push(u);
    }
    for dir in &dirs {
        for &r in radii {
            out.push(dir.iter().map(|u| u * r).collect());
        }
    }
    out
}

/// Independence residual of the split `S_n = S_m + (gap block) + tail`
/// against the mixing bound `16 alpha(gap + 1)`.
#[derive(Debug, Clone)]
pub struct CfIndependence {
    /// `max_z |E e^{i<z, V+W>} - E e^{i<z,V>} E e^{i<z,W>}|`.
    pub residual: f64,
    /// `16 alpha_hat(gap + 1)`.
    pub bound: f64,
    /// Monte Carlo slack `5 / sqrt(R)` used by [`CfIndependence::holds`].
    pub slack: f64,
}

impl CfIndependence {
    pub fn holds(&self) -> bool {
        self.residual <= self.bound + self.slack
    }
}

/// Splits `S_n` at `m = (n - gap) / 2`: `V = A_n S_m` and
/// `W = A_n (S_n - S_{m+gap})`, then measures how far the pair is from
/// independence in the empirical characteristic function, against the
/// covariance-free mixing bound.
pub fn cf_independence_residual(
    batch: &PathBatch,
    track: &NormalizerTrack,
    n: usize,
    gap: usize,
    z_grid: &[Vec<f64>],
) -> Result<CfIndependence, CltError> {
    let idx = track
        .index_of(n)
        .ok_or(CltError::CheckpointOutOfRange {
            checkpoint: n,
            length: batch.length(),
        })?;
    if n > batch.length() {
        return Err(CltError::CheckpointOutOfRange {
            checkpoint: n,
            length: batch.length(),
        });
    }
    let m = if n > gap { (n - gap) / 2 } else { 0 };
    if m == 0 || m + gap >= n {
        return Err(CltError::InvalidSplit { m, gap, n });
    }

    let a = track.a(idx);
    let d = batch.dim();
    let replicas = batch.replicas();
    let mut v = vec![0.0; replicas * d];
    let mut w = vec![0.0; replicas * d];
    let mut acc_v = vec![0.0; d];
    let mut acc_w = vec![0.0; d];
    for r in 0..replicas {
        acc_v.iter_mut().for_each(|x| *x = 0.0);
        acc_w.iter_mut().for_each(|x| *x = 0.0);
        for t in 0..m {
            for (i, x) in batch.at(r, t).iter().enumerate() {
                acc_v[i] += x;
            }
        }
        for t in m + gap..n {
            for (i, x) in batch.at(r, t).iter().enumerate() {
                acc_w[i] += x;
            }
        }
        for i in 0..d {
            let mut av = 0.0;
            let mut aw = 0.0;
            for k in 0..d {
                av += a[(i, k)] * acc_v[k];
                aw += a[(i, k)] * acc_w[k];
            }
            v[r * d + i] = av;
            w[r * d + i] = aw;
        }
    }

    let mut residual = 0.0f64;
    for z in z_grid {
        let (mut jr, mut ji) = (0.0, 0.0);
        let (mut vr, mut vi) = (0.0, 0.0);
        let (mut wr, mut wi) = (0.0, 0.0);
        for r in 0..replicas {
            let pv = dot(z, &v[r * d..(r + 1) * d]);
            let pw = dot(z, &w[r * d..(r + 1) * d]);
            jr += cos(pv + pw);
            ji += sin(pv + pw);
            vr += cos(pv);
            vi += sin(pv);
            wr += cos(pw);
            wi += sin(pw);
        }
        let nf = replicas as f64;
        let (jr, ji) = (jr / nf, ji / nf);
        let (vr, vi) = (vr / nf, vi / nf);
        let (wr, wi) = (wr / nf, wi / nf);
        // Product of the marginal CFs.
        let pr = vr * wr - vi * wi;
        let pi = vr * wi + vi * wr;
        let dist = hypot(jr - pr, ji - pi);
        if dist > residual {
            residual = dist;
        }
    }

    let alpha = alpha_estimate_default(batch, gap + 1).map_err(|_| CltError::InvalidSplit {
        m,
        gap,
        n,
    })?;
    Ok(CfIndependence {
        residual,
        bound: 16.0 * alpha,
        slack: 5.0 / sqrt(replicas as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clt::{normalizer_track_from_batch, partial_sums};
    use crate::linalg::Mat;
    use crate::mixing::{generate, ProcessSpec};

    fn standard_samples(d: usize, count: usize, seed: u64) -> Samples {
        let mut rng = Rng::stream(seed, 1);
        draw_from_law(&GaussianLaw::standard(d), count, &mut rng)
    }

    #[test]
    fn gaussian_cf_closed_form() {
        let law = GaussianLaw::standard(2);
        let (re, im) = gaussian_cf(&law, &[1.0, 0.0]);
        assert!((re - exp(-0.5)).abs() < 1e-15);
        assert!(im.abs() < 1e-15);

        let shifted = GaussianLaw::new(vec![1.0], Mat::scalar(1, 2.0)).unwrap();
        let (re, im) = gaussian_cf(&shifted, &[0.5]);
        // exp(i 0.5 - 0.25): modulus e^{-0.25}, phase 0.5.
        assert!((hypot(re, im) - exp(-0.25)).abs() < 1e-15);
        assert!((im / re - libm::tan(0.5)).abs() < 1e-12);
    }

    #[test]
    fn empirical_cf_matches_gaussian() {
        let law = GaussianLaw::standard(2);
        let samples = standard_samples(2, 40_000, 5);
        for z in default_z_grid(2, 4, &[0.5, 1.0, 2.0]) {
            let (er, ei) = empirical_cf(&samples, &z);
            let (gr, gi) = gaussian_cf(&law, &z);
            assert!(hypot(er - gr, ei - gi) < 0.02);
        }
    }

    #[test]
    fn energy_distance_separates_scales() {
        let x = standard_samples(2, 600, 7);
        let y = standard_samples(2, 600, 8);
        let near = energy_distance(&x, &y);

        let mut rng = Rng::stream(9, 1);
        let wide = draw_from_law(
            &GaussianLaw::centered(Mat::identity(2).scale(4.0)).unwrap(),
            600,
            &mut rng,
        );
        let far = energy_distance(&x, &wide);
        assert!(far > 10.0 * near.abs().max(1e-4), "near {near} far {far}");
    }

    #[test]
    fn limit_distance_on_matching_law() {
        let law = GaussianLaw::standard(2);
        let samples = standard_samples(2, 20_000, 11);
        let grid = default_z_grid(2, 4, &[0.5, 1.0, 2.0]);
        let (energy, cf_sup) = limit_distance(&samples, &law, &grid, 13);
        assert!(cf_sup < 0.02, "cf_sup {cf_sup}");
        // The energy statistic fluctuates around zero under the null.
        assert!(energy.abs() < 0.05, "energy {energy}");
        // Empty grid edge case.
        let (_, zero) = limit_distance(&samples, &law, &[], 13);
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn cf_sup_detects_wrong_scale() {
        // N(0, 4I) against N(0, I): the CF gap at |z| = 1 is
        // |e^{-2} - e^{-1/2}| ~ 0.47.
        let mut rng = Rng::stream(17, 1);
        let wide = draw_from_law(
            &GaussianLaw::centered(Mat::identity(2).scale(4.0)).unwrap(),
            20_000,
            &mut rng,
        );
        let grid = default_z_grid(2, 4, &[1.0]);
        let (_, cf_sup) = limit_distance(&wide, &GaussianLaw::standard(2), &grid, 19);
        assert!(cf_sup > 0.4, "cf_sup {cf_sup}");
    }

    #[test]
    fn permutation_band_accepts_null_samples() {
        let law = GaussianLaw::standard(2);
        let samples = standard_samples(2, 4_000, 23);
        let band = energy_permutation_band(&samples, &law, 200, 512, 29);
        assert!(band.within(), "stat {} band [{}, {}]", band.statistic, band.lower, band.upper);
    }

    #[test]
    fn permutation_band_rejects_shifted_samples() {
        let law = GaussianLaw::standard(2);
        let mut rng = Rng::stream(31, 1);
        let shifted = draw_from_law(
            &GaussianLaw::new(vec![0.6, 0.0], Mat::identity(2)).unwrap(),
            4_000,
            &mut rng,
        );
        let band = energy_permutation_band(&shifted, &law, 200, 512, 37);
        assert!(band.statistic > band.upper);
    }

    #[test]
    fn energy_orthogonal_reframing_stays_in_band() {
        // Rotating the samples is a symmetry of the target: the energy
        // distance moves only within the permutation-null spread.
        let samples = standard_samples(2, 3_000, 41);
        let law = GaussianLaw::standard(2);
        let th = 0.8;
        let rot = Mat::from_rows(&[
            &[libm::cos(th), -libm::sin(th)],
            &[libm::sin(th), libm::cos(th)],
        ]);
        let rotated = samples.affine(&rot, &[0.0, 0.0]);
        let b1 = energy_permutation_band(&samples, &law, 200, 512, 43);
        let b2 = energy_permutation_band(&rotated, &law, 200, 512, 43);
        let spread = (b1.upper - b1.lower).max(b2.upper - b2.lower);
        assert!((b1.statistic - b2.statistic).abs() <= 2.0 * spread);
    }

    #[test]
    fn iid_split_is_independent() {
        let batch = generate(
            &ProcessSpec::Iid {
                innovation: GaussianLaw::standard(1),
            },
            64,
            20_000,
            47,
        )
        .unwrap();
        let track = normalizer_track_from_batch(&batch, &[64]).unwrap();
        let grid = default_z_grid(1, 2, &[0.5, 1.0, 2.0]);
        let res = cf_independence_residual(&batch, &track, 64, 2, &grid).unwrap();
        assert!(res.residual < 0.03, "residual {}", res.residual);
        assert!(res.holds());
    }

    #[test]
    fn ma_one_split_beyond_window_independent() {
        let batch = generate(
            &ProcessSpec::Ma {
                coeffs: vec![Mat::identity(1), Mat::identity(1)],
                innovation: GaussianLaw::standard(1),
            },
            64,
            20_000,
            53,
        )
        .unwrap();
        let track = normalizer_track_from_batch(&batch, &[64]).unwrap();
        let grid = default_z_grid(1, 2, &[0.5, 1.0, 2.0]);
        // gap = 1 already separates an MA(1).
        let res = cf_independence_residual(&batch, &track, 64, 1, &grid).unwrap();
        assert!(res.holds(), "residual {} bound {}", res.residual, res.bound);
    }

    #[test]
    fn ar1_residual_decays_with_gap() {
        let batch = generate(
            &ProcessSpec::Ar1 {
                transition: Mat::scalar(1, 0.5),
                innovation: GaussianLaw::standard(1),
            },
            32,
            100_000,
            59,
        )
        .unwrap();
        let track = normalizer_track_from_batch(&batch, &[32]).unwrap();
        let grid = default_z_grid(1, 2, &[0.5, 1.0, 2.0]);
        let r1 = cf_independence_residual(&batch, &track, 32, 1, &grid).unwrap();
        let r4 = cf_independence_residual(&batch, &track, 32, 4, &grid).unwrap();
        let r16 = cf_independence_residual(&batch, &track, 32, 16, &grid).unwrap();
        assert!(r1.residual > r16.residual, "{} vs {}", r1.residual, r16.residual);
        assert!(r4.residual <= r1.residual + 0.01);
        assert!(r16.residual <= r4.residual + 0.01);
        for r in [&r1, &r4, &r16] {
            assert!(r.holds(), "residual {} bound {}", r.residual, r.bound);
        }
    }

    #[test]
    fn invalid_split_rejected() {
        let batch = generate(
            &ProcessSpec::Iid {
                innovation: GaussianLaw::standard(1),
            },
            16,
            100,
            61,
        )
        .unwrap();
        let track = normalizer_track_from_batch(&batch, &[16]).unwrap();
        let grid = default_z_grid(1, 1, &[1.0]);
        assert!(matches!(
            cf_independence_residual(&batch, &track, 16, 15, &grid),
            Err(CltError::InvalidSplit { .. })
        ));
    }

    #[test]
    fn normalized_sums_mean_and_cov_invariant() {
        // Affine consistency: mean within 3/sqrt(R), ||cov - I|| within
        // 10/sqrt(R) (they are exact up to numerics by construction).
        let batch = generate(
            &ProcessSpec::Ar1 {
                transition: Mat::from_rows(&[&[0.5, 0.2], &[0.0, 0.3]]),
                innovation: GaussianLaw::standard(2),
            },
            128,
            5_000,
            67,
        )
        .unwrap();
        let sums = partial_sums(&batch, &[128]).unwrap();
        let track = crate::clt::choose_normalizers(&sums).unwrap();
        let normed = sums[0].1.affine(track.a(0), track.b(0));
        let r = normed.replicas() as f64;
        for m in normed.mean() {
            assert!(m.abs() <= 3.0 / sqrt(r));
        }
        let gap = normed.covariance().sub(&Mat::identity(2)).frob_norm();
        assert!(gap <= 10.0 / sqrt(r));
    }
}
