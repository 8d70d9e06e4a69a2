//! Strongly mixing sequence generators and an empirical lower bound for the
//! dependence coefficient `alpha(n)`.
//!
//! The shipped processes are the standard strongly mixing exemplars: i.i.d.
//! sequences (`alpha == 0`), finite-order moving averages (`alpha(n) == 0`
//! beyond the window) and geometrically ergodic vector AR(1). Probabilities
//! are estimated across independent replicas rather than along a single
//! path, so dependence is never conflated with ergodic-average error.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{solve_stein, spd_sqrt, spectral_radius, LinalgError, Mat};
use crate::rng::Rng;
use crate::semigroup::{GaussianLaw, SemigroupError};

#[derive(Debug, Clone, PartialEq)]
pub enum MixingError {
    Linalg(LinalgError),
    /// AR(1) transition must have spectral radius below one.
    UnstableTransition { radius: f64 },
    DimMismatch,
    /// Requested lag does not fit the path length.
    LagOutOfRange { lag: usize, length: usize },
    EmptyBatch,
}

impl fmt::Display for MixingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixingError::Linalg(e) => write!(f, "{e}"),
            MixingError::UnstableTransition { radius } => {
                write!(f, "AR(1) transition has spectral radius {radius} >= 1")
            }
            MixingError::DimMismatch => write!(f, "process dimensions do not match"),
            MixingError::LagOutOfRange { lag, length } => {
                write!(f, "lag {lag} out of range for paths of length {length}")
            }
            MixingError::EmptyBatch => write!(f, "batch must have replicas and length >= 1"),
        }
    }
}

impl core::error::Error for MixingError {}

impl From<LinalgError> for MixingError {
    fn from(e: LinalgError) -> Self {
        MixingError::Linalg(e)
    }
}

impl From<SemigroupError> for MixingError {
    fn from(e: SemigroupError) -> Self {
        match e {
            SemigroupError::Linalg(l) => MixingError::Linalg(l),
            _ => MixingError::DimMismatch,
        }
    }
}

/// Generator parameters for a strongly mixing sequence.
#[derive(Debug, Clone)]
pub enum ProcessSpec {
    Iid {
        innovation: GaussianLaw,
    },
    /// `X_t = sum_j coeffs[j] eps_{t-j}`, an m-dependent moving average.
    Ma {
        coeffs: Vec<Mat>,
        innovation: GaussianLaw,
    },
    /// `X_{t+1} = transition X_t + eps_{t+1}`, started at its stationary law.
    Ar1 {
        transition: Mat,
        innovation: GaussianLaw,
    },
}

impl ProcessSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProcessSpec::Iid { innovation } => innovation.dim(),
            ProcessSpec::Ma { innovation, .. } => innovation.dim(),
            ProcessSpec::Ar1 { innovation, .. } => innovation.dim(),
        }
    }

    pub fn validate(&self) -> Result<(), MixingError> {
        match self {
            ProcessSpec::Iid { .. } => Ok(()),
            ProcessSpec::Ma { coeffs, innovation } => {
                if coeffs.is_empty()
                    || coeffs
                        .iter()
                        .any(|c| !c.is_square() || c.dim() != innovation.dim())
                {
                    return Err(MixingError::DimMismatch);
                }
                Ok(())
            }
            ProcessSpec::Ar1 {
                transition,
                innovation,
            } => {
                if !transition.is_square() || transition.dim() != innovation.dim() {
                    return Err(MixingError::DimMismatch);
                }
                let radius = spectral_radius(transition)?;
                if radius >= 1.0 {
                    return Err(MixingError::UnstableTransition { radius });
                }
                Ok(())
            }
        }
    }
}

/// Replicated simulated paths, regenerable bit-exactly from
/// `(spec, length, replicas, seed)`.
#[derive(Debug, Clone)]
pub struct PathBatch {
    replicas: usize,
    length: usize,
    dim: usize,
    data: Vec<f64>,
    seed: u64,
    spec: ProcessSpec,
}

impl PathBatch {
    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    /// Observation `X_{t+1}` of replica `r` (`t` is 0-based).
    #[inline]
    pub fn at(&self, replica: usize, t: usize) -> &[f64] {
        debug_assert!(replica < self.replicas && t < self.length);
        let start = (replica * self.length + t) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn draw_innovation(mean: &[f64], factor: &Mat, rng: &mut Rng, out: &mut [f64]) {
    let d = mean.len();
    let mut z = [0.0f64; 16];
    debug_assert!(d <= 16);
    for zi in z.iter_mut().take(d) {
        *zi = rng.next_normal();
    }
    for i in 0..d {
        let mut acc = mean[i];
        for j in 0..d {
            acc += factor[(i, j)] * z[j];
        }
        out[i] = acc;
    }
}

/// Simulates `replicas` independent paths of length `n`.
///
/// Replica `r` draws from the derived stream `(seed, r)`, so parallel and
/// serial fills produce identical batches. AR(1) paths start at the
/// stationary law (Stein-equation covariance) and are therefore strictly
/// stationary; moving averages prime an m-step innovation window.
pub fn generate(
    spec: &ProcessSpec,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<PathBatch, MixingError> {
    generate_slice(spec, n, replicas, seed, 0)
}

/// Replicas `first_stream .. first_stream + count` of the batch that
/// [`generate`] would produce: chunked generation reproduces the one-shot
/// batch replica for replica, which keeps out-of-core pipelines bit-exact.
pub fn generate_slice(
    spec: &ProcessSpec,
    n: usize,
    count: usize,
    seed: u64,
    first_stream: usize,
) -> Result<PathBatch, MixingError> {
    let replicas = count;
    if n == 0 || replicas == 0 {
        return Err(MixingError::EmptyBatch);
    }
    spec.validate()?;
    let d = spec.dim();
    assert!(d <= 16, "dimension cap for stack buffers");
    let mut data = vec![0.0; replicas * n * d];

    match spec {
        ProcessSpec::Iid { innovation } => {
            let factor = spd_sqrt(innovation.cov())?;
            for r in 0..replicas {
                let mut rng = Rng::stream(seed, (first_stream + r) as u64);
                for t in 0..n {
                    let start = (r * n + t) * d;
                    draw_innovation(
                        innovation.mean(),
                        &factor,
                        &mut rng,
                        &mut data[start..start + d],
                    );
                }
            }
        }
        ProcessSpec::Ma { coeffs, innovation } => {
            let factor = spd_sqrt(innovation.cov())?;
            let m = coeffs.len() - 1;
            let slots = m + 1;
            let mut window: Vec<f64> = vec![0.0; slots * d];
            let mut eps = vec![0.0; d];
            for r in 0..replicas {
                let mut rng = Rng::stream(seed, (first_stream + r) as u64);
                for k in 0..slots {
                    draw_innovation(innovation.mean(), &factor, &mut rng, &mut eps);
                    window[k * d..k * d + d].copy_from_slice(&eps);
                }
                let mut newest = m;
                for t in 0..n {
                    if t > 0 {
                        newest = (newest + 1) % slots;
                        draw_innovation(innovation.mean(), &factor, &mut rng, &mut eps);
                        window[newest * d..newest * d + d].copy_from_slice(&eps);
                    }
                    let start = (r * n + t) * d;
                    for (j, theta) in coeffs.iter().enumerate() {
                        // eps_{t-j} sits j slots behind the newest draw.
                        let slot = (newest + slots - j) % slots;
                        for i in 0..d {
                            let mut acc = 0.0;
                            for k in 0..d {
                                acc += theta[(i, k)] * window[slot * d + k];
                            }
                            data[start + i] += acc;
                        }
                    }
                }
            }
        }
        ProcessSpec::Ar1 {
            transition,
            innovation,
        } => {
            let factor = spd_sqrt(innovation.cov())?;
            let stat_cov = solve_stein(transition, innovation.cov())?;
            let stat_factor = spd_sqrt(&stat_cov)?;
            // Stationary mean solves m = B m + mean(eps).
            let eye = Mat::identity(d);
            let stat_mean = eye.sub(transition).inverse()?.matvec(innovation.mean());
            let mut eps = vec![0.0; d];
            let mut state = vec![0.0; d];
            let mut prev = vec![0.0; d];
            for r in 0..replicas {
                let mut rng = Rng::stream(seed, (first_stream + r) as u64);
                draw_innovation(&stat_mean, &stat_factor, &mut rng, &mut state);
                for t in 0..n {
                    if t > 0 {
                        draw_innovation(innovation.mean(), &factor, &mut rng, &mut eps);
                        prev.copy_from_slice(&state);
                        for i in 0..d {
                            let mut acc = eps[i];
                            for k in 0..d {
                                acc += transition[(i, k)] * prev[k];
                            }
                            state[i] = acc;
                        }
                    }
                    let start = (r * n + t) * d;
                    data[start..start + d].copy_from_slice(&state);
                }
            }
        }
    }

    Ok(PathBatch {
        replicas,
        length: n,
        dim: d,
        data,
        seed,
        spec: spec.clone(),
    })
}

/// Deterministic direction family shared by every estimate: the first `k`
/// draws of a fixed stream, normalized to the unit sphere, so enlarging the
/// family keeps the smaller one as a prefix.
fn direction_family(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = Rng::stream(0x5EED_D14C_7104_5EED, dim as u64);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let norm = crate::linalg::norm2(&u);
        if norm < 1e-12 {
            continue;
        }
        for ui in u.iter_mut() {
            *ui /= norm;
        }
        out.push(u);
    }
    out
}

/// Past positions `j` (1-based), newest first by repeated halving of the
/// usable range, so a larger `positions` family extends the smaller one.
fn position_family(usable: usize, count: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut j = usable;
    while out.len() < count && j >= 1 {
        if !out.contains(&j) {
            out.push(j);
        }
        if j == 1 {
            break;
        }
        j /= 2;
    }
    out
}

fn quantile_thresholds(values: &mut [f64], count: usize) -> Vec<f64> {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    (0..count)
        .map(|k| {
            let level = if count == 1 {
                0.5
            } else {
                0.1 + 0.8 * k as f64 / (count - 1) as f64
            };
            let idx = ((n as f64 - 1.0) * level) as usize;
            values[idx]
        })
        .collect()
}

/// Plug-in lower bound for the mixing coefficient `alpha(lag)`.
///
/// The event family consists of half-spaces `{<u, X_j> <= tau}` over a
/// deterministic direction family, empirical-quantile thresholds and a
/// ladder of past positions `j`, paired against the same form at position
/// `j + lag`. The estimate is the max of `|P(A and B) - P(A) P(B)|` with
/// probabilities taken across replicas; the true coefficient is a sup over
/// all events, so this is a lower bound up to Monte Carlo noise.
pub fn alpha_estimate(
    batch: &PathBatch,
    lag: usize,
    directions: usize,
    thresholds: usize,
    positions: usize,
) -> Result<f64, MixingError> {
    if lag == 0 || lag >= batch.length() {
        return Err(MixingError::LagOutOfRange {
            lag,
            length: batch.length(),
        });
    }
    assert!(directions >= 1 && thresholds >= 1 && positions >= 1);
    let replicas = batch.replicas();
    let dirs = direction_family(batch.dim(), directions);
    let js = position_family(batch.length() - lag, positions);
    let bins = thresholds + 1;

    let mut best = 0.0f64;
    let mut proj = vec![0.0f64; replicas];
    let mut bin_a = vec![0usize; replicas];
    let mut bin_b = vec![0usize; replicas];
    let mut joint = vec![0u32; bins * bins];
    let mut cum = vec![0u32; bins * bins];

    for &j in &js {
        let t_a = j - 1;
        let t_b = j + lag - 1;
        for u_a in &dirs {
            for (r, slot) in proj.iter_mut().enumerate() {
                *slot = crate::linalg::dot(u_a, batch.at(r, t_a));
            }
            let mut sorted = proj.clone();
            let taus_a = quantile_thresholds(&mut sorted, thresholds);
            for (r, slot) in bin_a.iter_mut().enumerate() {
                *slot = taus_a.iter().filter(|&&t| proj[r] > t).count();
            }
            for u_b in &dirs {
                for (r, slot) in proj.iter_mut().enumerate() {
                    *slot = crate::linalg::dot(u_b, batch.at(r, t_b));
                }
                let mut sorted = proj.clone();
                let taus_b = quantile_thresholds(&mut sorted, thresholds);
                for (r, slot) in bin_b.iter_mut().enumerate() {
                    *slot = taus_b.iter().filter(|&&t| proj[r] > t).count();
                }

                joint.iter_mut().for_each(|c| *c = 0);
                for r in 0..replicas {
                    joint[bin_a[r] * bins + bin_b[r]] += 1;
                }
                // Cumulating the histogram evaluates every threshold pair
                // {<= tau_a} x {<= tau_b} in one pass.
                for a in 0..bins {
                    for b in 0..bins {
                        let mut c = joint[a * bins + b];
                        if a > 0 {
                            c += cum[(a - 1) * bins + b];
                        }
                        if b > 0 {
                            c += cum[a * bins + (b - 1)];
                        }
                        if a > 0 && b > 0 {
                            c -= cum[(a - 1) * bins + (b - 1)];
                        }
                        cum[a * bins + b] = c;
                    }
                }
                let total = replicas as f64;
                for a in 0..thresholds {
                    let pa = cum[a * bins + (bins - 1)] as f64 / total;
                    for b in 0..thresholds {
                        let pb = cum[(bins - 1) * bins + b] as f64 / total;
                        let pab = cum[a * bins + b] as f64 / total;
                        let dep = (pab - pa * pb).abs();
                        if dep > best {
                            best = dep;
                        }
                    }
                }
            }
        }
    }
    Ok(best)
}

/// [`alpha_estimate`] with the default family: 8 directions, 7 thresholds,
/// 3 past positions.
pub fn alpha_estimate_default(batch: &PathBatch, lag: usize) -> Result<f64, MixingError> {
    alpha_estimate(batch, lag, 8, 7, 3)
}
