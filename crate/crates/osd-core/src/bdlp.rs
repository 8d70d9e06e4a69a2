//! Levy-driven operator Ornstein-Uhlenbeck sampling and the
//! selfdecomposability factorization check.
//!
//! The target law is `mu = L( integral_0^inf exp(-tQ) dY(t) )` for a Levy
//! process `Y` (drift + Brownian part + compound Poisson jumps) and a
//! matrix `Q` whose spectrum lies in the open right half plane. Draws come
//! from exact-in-law stepping: the Gaussian part uses the block-exponential
//! covariance integral per step (no discretization bias), jumps are placed
//! at their uniform times inside the step and propagated by the flow.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::{ceil, hypot, sqrt};

use crate::clt::Samples;
use crate::linalg::{
    mat_exp, min_real_eigenvalue, psd_margin, spd_sqrt, van_loan_cov, LinalgError, Mat,
};
use crate::rng::Rng;
use crate::semigroup::GaussianLaw;

#[derive(Debug, Clone, PartialEq)]
pub enum BdlpError {
    Linalg(LinalgError),
    DimMismatch,
    /// Diffusion matrix must be symmetric positive-semidefinite.
    BadDiffusion { margin: f64 },
    /// Jump rate must be finite and nonnegative; a positive rate needs a
    /// jump law.
    BadJumps,
    /// Step and horizon must be positive with `step <= horizon`.
    BadStep,
    /// `exp(-TQ)` is not negligible at the configured horizon.
    HorizonTooShort { tail_norm: f64 },
    /// The generator spectrum must lie in the open right half plane.
    GeneratorNotStable { margin: f64 },
}

impl fmt::Display for BdlpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BdlpError::Linalg(e) => write!(f, "{e}"),
            BdlpError::DimMismatch => write!(f, "Levy spec dimensions do not match"),
            BdlpError::BadDiffusion { margin } => {
                write!(f, "diffusion not psd (margin {margin:e})")
            }
            BdlpError::BadJumps => write!(f, "invalid jump configuration"),
            BdlpError::BadStep => write!(f, "step and horizon must be positive"),
            BdlpError::HorizonTooShort { tail_norm } => {
                write!(f, "horizon too short: ||exp(-TQ)|| = {tail_norm:e} > 1e-6")
            }
            BdlpError::GeneratorNotStable { margin } => {
                write!(f, "generator spectral margin {margin} not positive")
            }
        }
    }
}

impl core::error::Error for BdlpError {}

impl From<LinalgError> for BdlpError {
    fn from(e: LinalgError) -> Self {
        BdlpError::Linalg(e)
    }
}

/// Law of a single jump.
#[derive(Debug, Clone)]
pub enum JumpLaw {
    Gaussian(GaussianLaw),
    /// Deterministic jump vector (useful for exactness tests).
    Fixed(Vec<f64>),
}

impl JumpLaw {
    pub fn dim(&self) -> usize {
        match self {
            JumpLaw::Gaussian(law) => law.dim(),
            JumpLaw::Fixed(v) => v.len(),
        }
    }

    /// Second moment matrix `E[J J^T]`.
    pub fn second_moment(&self) -> Mat {
        match self {
            JumpLaw::Gaussian(law) => {
                let d = law.dim();
                let mut m = law.cov().clone();
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] += law.mean()[i] * law.mean()[j];
                    }
                }
                m
            }
            JumpLaw::Fixed(v) => {
                let d = v.len();
                let mut m = Mat::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = v[i] * v[j];
                    }
                }
                m
            }
        }
    }
}

/// Levy triplet for the background driving process: drift, Brownian
/// covariance and compound Poisson jumps.
#[derive(Debug, Clone)]
pub struct LevySpec {
    drift: Vec<f64>,
    diffusion: Mat,
    jump_rate: f64,
    jump_law: Option<JumpLaw>,
}

impl LevySpec {
    pub fn new(
        drift: Vec<f64>,
        diffusion: Mat,
        jump_rate: f64,
        jump_law: Option<JumpLaw>,
    ) -> Result<Self, BdlpError> {
        let d = drift.len();
        if !diffusion.is_square() || diffusion.dim() != d {
            return Err(BdlpError::DimMismatch);
        }
        let margin = psd_margin(&diffusion);
        if margin < -1e-10 * diffusion.max_abs().max(1.0) {
            return Err(BdlpError::BadDiffusion { margin });
        }
        if jump_rate.is_nan() || jump_rate < 0.0 || !jump_rate.is_finite() {
            return Err(BdlpError::BadJumps);
        }
        if jump_rate > 0.0 {
            match &jump_law {
                Some(law) if law.dim() == d => {}
                _ => return Err(BdlpError::BadJumps),
            }
        }
        Ok(LevySpec {
            drift,
            diffusion,
            jump_rate,
            jump_law,
        })
    }

    /// The zero process (deterministically constant paths).
    pub fn zero(dim: usize) -> Self {
        LevySpec {
            drift: vec![0.0; dim],
            diffusion: Mat::zeros(dim, dim),
            jump_rate: 0.0,
            jump_law: None,
        }
    }

    /// Standard Brownian motion.
    pub fn brownian(dim: usize) -> Self {
        LevySpec {
            drift: vec![0.0; dim],
            diffusion: Mat::identity(dim),
            jump_rate: 0.0,
            jump_law: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn diffusion(&self) -> &Mat {
        &self.diffusion
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn jump_law(&self) -> Option<&JumpLaw> {
        self.jump_law.as_ref()
    }

    fn draw_jump(&self, rng: &mut Rng, out: &mut [f64]) {
        match self.jump_law.as_ref().expect("jump law present") {
            JumpLaw::Gaussian(law) => {
                let d = law.dim();
                let factor = spd_sqrt(law.cov()).expect("jump covariance is psd");
                let mut z = [0.0f64; 16];
                for zi in z.iter_mut().take(d) {
                    *zi = rng.next_normal();
                }
                for i in 0..d {
                    let mut acc = law.mean()[i];
                    for j in 0..d {
                        acc += factor[(i, j)] * z[j];
                    }
                    out[i] = acc;
                }
            }
            JumpLaw::Fixed(v) => out.copy_from_slice(v),
        }
    }
}

/// Increment of the driving Levy process over a window of length `h`:
/// `b h + N(0, h D) + sum of Poisson(lambda h) jumps`.
pub fn levy_increment(spec: &LevySpec, h: f64, rng: &mut Rng) -> Vec<f64> {
    assert!(h > 0.0);
    let d = spec.dim();
    let mut out: Vec<f64> = spec.drift.iter().map(|b| b * h).collect();
    if spec.diffusion.max_abs() > 0.0 {
        let factor = spd_sqrt(&spec.diffusion).expect("diffusion is psd");
        let root_h = sqrt(h);
        let z: Vec<f64> = (0..d).map(|_| rng.next_normal()).collect();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += factor[(i, j)] * z[j];
            }
            out[i] += root_h * acc;
        }
    }
    if spec.jump_rate > 0.0 {
        let count = rng.next_poisson(spec.jump_rate * h);
        let mut jump = vec![0.0; d];
        for _ in 0..count {
            spec.draw_jump(rng, &mut jump);
            for i in 0..d {
                out[i] += jump[i];
            }
        }
    }
    out
}

/// Precomputed one-step state for the operator OU recursion at a fixed
/// step size.
#[derive(Debug, Clone)]
struct OuStepper {
    q: Mat,
    h: f64,
    /// `exp(-hQ)`.
    flow: Mat,
    /// Factor of the exact Gaussian-part covariance over one step.
    noise_factor: Mat,
    has_noise: bool,
    /// `Q^{-1} (I - exp(-hQ)) b`.
    drift_term: Vec<f64>,
}

impl OuStepper {
    fn new(q: &Mat, h: f64, spec: &LevySpec) -> Result<Self, BdlpError> {
        if h.is_nan() || h <= 0.0 {
            return Err(BdlpError::BadStep);
        }
        if q.dim() != spec.dim() {
            return Err(BdlpError::DimMismatch);
        }
        let (flow, sigma_h) = van_loan_cov(q, &spec.diffusion, h)?;
        let has_noise = sigma_h.max_abs() > 1e-300;
        let noise_factor = if has_noise {
            spd_sqrt(&sigma_h)?
        } else {
            Mat::zeros(q.dim(), q.dim())
        };
        let eye = Mat::identity(q.dim());
        let drift_term = q
            .inverse()?
            .matmul(&eye.sub(&flow))
            .matvec(&spec.drift);
        Ok(OuStepper {
            q: q.clone(),
            h,
            flow,
            noise_factor,
            has_noise,
            drift_term,
        })
    }

    fn step(&self, state: &mut [f64], spec: &LevySpec, rng: &mut Rng) {
        let d = state.len();
        // Flow of the previous state plus the deterministic drift response.
        let mut next = self.flow.matvec(state);
        for (n, drift) in next.iter_mut().zip(&self.drift_term) {
            *n += drift;
        }
        if self.has_noise {
            let z: Vec<f64> = (0..d).map(|_| rng.next_normal()).collect();
            for (i, n) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, zj) in z.iter().enumerate() {
                    acc += self.noise_factor[(i, j)] * zj;
                }
                *n += acc;
            }
        }
        if spec.jump_rate > 0.0 {
            let count = rng.next_poisson(spec.jump_rate * self.h);
            if count > 0 {
                let mut jump = vec![0.0; d];
                for _ in 0..count {
                    let tau = rng.next_f64() * self.h;
                    spec.draw_jump(rng, &mut jump);
                    // Propagate the jump from its arrival time to the end
                    // of the step.
                    let prop = mat_exp(&self.q, -(self.h - tau)).expect("flow exponential");
                    let moved = prop.matvec(&jump);
                    for i in 0..d {
                        next[i] += moved[i];
                    }
                }
            }
        }
        state.copy_from_slice(&next);
    }
}

/// One exact-in-law step of the operator OU recursion:
/// `z' = exp(-hQ) z + drift response + Gaussian integral + propagated jumps`.
pub fn ou_step(
    q: &Mat,
    h: f64,
    state: &[f64],
    spec: &LevySpec,
    rng: &mut Rng,
) -> Result<Vec<f64>, BdlpError> {
    let stepper = OuStepper::new(q, h, spec)?;
    let mut z = state.to_vec();
    stepper.step(&mut z, spec, rng);
    Ok(z)
}

/// Sampler for the stationary law `mu`: runs the OU recursion from zero
/// over a horizon long enough that the truncated tail of the random
/// integral is negligible.
#[derive(Debug, Clone)]
pub struct OsdSampler {
    q: Mat,
    levy: LevySpec,
    step: f64,
    horizon: f64,
    spectral_margin: f64,
}

impl OsdSampler {
    pub fn new(q: Mat, levy: LevySpec, step: f64, horizon: f64) -> Result<Self, BdlpError> {
        if q.dim() != levy.dim() {
            return Err(BdlpError::DimMismatch);
        }
        if step.is_nan() || horizon.is_nan() || step <= 0.0 || horizon < step {
            return Err(BdlpError::BadStep);
        }
        let margin = min_real_eigenvalue(&q)?;
        if margin <= 0.0 {
            return Err(BdlpError::GeneratorNotStable { margin });
        }
        let tail_norm = mat_exp(&q, -horizon)?.op_norm();
        if tail_norm > 1e-6 {
            return Err(BdlpError::HorizonTooShort { tail_norm });
        }
        Ok(OsdSampler {
            q,
            levy,
            step,
            horizon,
            spectral_margin: margin,
        })
    }

    /// Horizon rule `T = 20 / spectral_margin(Q)` and default step `1/64`.
    pub fn with_default_horizon(q: Mat, levy: LevySpec) -> Result<Self, BdlpError> {
        let margin = min_real_eigenvalue(&q)?;
        if margin <= 0.0 {
            return Err(BdlpError::GeneratorNotStable { margin });
        }
        OsdSampler::new(q, levy, 1.0 / 64.0, 20.0 / margin)
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn levy(&self) -> &LevySpec {
        &self.levy
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn spectral_margin(&self) -> f64 {
        self.spectral_margin
    }

    /// Stationary covariance of the Gaussian part plus the jump second
    /// moments: solves `Q S + S Q^T = D + lambda E[J J^T]`.
    pub fn stationary_covariance(&self) -> Result<Mat, BdlpError> {
        let mut rhs = self.levy.diffusion.clone();
        if self.levy.jump_rate > 0.0 {
            let m2 = self
                .levy
                .jump_law
                .as_ref()
                .ok_or(BdlpError::BadJumps)?
                .second_moment()
                .scale(self.levy.jump_rate);
            rhs = rhs.add(&m2);
        }
        Ok(crate::linalg::solve_lyapunov(&self.q, &rhs)?)
    }
}

fn run_chain(
    q: &Mat,
    levy: &LevySpec,
    step: f64,
    horizon: f64,
    draws: usize,
    seed: u64,
) -> Result<Samples, BdlpError> {
    let d = q.dim();
    let full_steps = ceil(horizon / step - 1e-12) as usize;
    let stepper = OuStepper::new(q, step, levy)?;
    // Remainder step keeps the total time exactly at the horizon.
    let remainder = horizon - (full_steps as f64 - 1.0).max(0.0) * step;
    let last = if remainder > 1e-12 && (remainder - step).abs() > 1e-12 {
        Some(OuStepper::new(q, remainder, levy)?)
    } else {
        None
    };

    let mut data = vec![0.0; draws * d];
    let mut state = vec![0.0; d];
    for i in 0..draws {
        let mut rng = Rng::stream(seed, i as u64);
        state.iter_mut().for_each(|x| *x = 0.0);
        let regular = if last.is_some() {
            full_steps.saturating_sub(1)
        } else {
            full_steps
        };
        for _ in 0..regular {
            stepper.step(&mut state, levy, &mut rng);
        }
        if let Some(ref tail) = last {
            tail.step(&mut state, levy, &mut rng);
        }
        data[i * d..(i + 1) * d].copy_from_slice(&state);
    }
    Ok(Samples::new(draws, d, data))
}

/// `draws` approximately-independent samples of the stationary law, one
/// OU chain from zero per draw, each on its own derived stream.
pub fn sample_osd(sampler: &OsdSampler, draws: usize, seed: u64) -> Result<Samples, BdlpError> {
    assert!(draws >= 1);
    run_chain(
        &sampler.q,
        &sampler.levy,
        sampler.step,
        sampler.horizon,
        draws,
        seed,
    )
}

/// Samples of the partial integral `nu_t = L( integral_0^t e^{-sQ} dY )`,
/// the residual law in the factorization identity.
pub fn sample_partial_integral(
    q: &Mat,
    levy: &LevySpec,
    step: f64,
    t: f64,
    draws: usize,
    seed: u64,
) -> Result<Samples, BdlpError> {
    if t.is_nan() || t <= 0.0 {
        return Err(BdlpError::BadStep);
    }
    run_chain(q, levy, step.min(t), t, draws, seed)
}

/// Empirical check of the defining factorization
/// `phi_mu(z) = phi_mu(exp(-tQ)^T z) phi_{nu_t}(z)`:
/// returns the max modulus mismatch over the grid. A small residual
/// certifies `exp(-tQ)` as a member of the decomposability semigroup of
/// the sampled law; `nu_t` is regenerated from the `q` argument, so a
/// corrupted generator degrades both sides of the identity.
pub fn factorization_check(
    samples: &Samples,
    q: &Mat,
    t: f64,
    sampler: &OsdSampler,
    z_grid: &[Vec<f64>],
    nu_seed: u64,
) -> Result<f64, BdlpError> {
    assert!(t > 0.0);
    let nu = sample_partial_integral(
        q,
        &sampler.levy,
        sampler.step,
        t,
        samples.replicas(),
        nu_seed,
    )?;
    let twist = mat_exp(q, -t)?.transpose();

    let cf = |s: &Samples, z: &[f64]| -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for r in 0..s.replicas() {
            let phase = crate::linalg::dot(z, s.at(r));
            re += libm::cos(phase);
            im += libm::sin(phase);
        }
        let n = s.replicas() as f64;
        (re / n, im / n)
    };

    let mut residual = 0.0f64;
    for z in z_grid {
        let (mr, mi) = cf(samples, z);
        let tz = twist.matvec(z);
        let (ar, ai) = cf(samples, &tz);
        let (nr, ni) = cf(&nu, z);
        // phi_mu(e^{-tQ^T} z) * phi_nu(z)
        let pr = ar * nr - ai * ni;
        let pi = ar * ni + ai * nr;
        let gap = hypot(mr - pr, mi - pi);
        if gap > residual {
            residual = gap;
        }
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clt::default_z_grid;
    use crate::semigroup::gaussian_membership;
    use libm::{exp, fabs};

    fn brownian_sampler() -> OsdSampler {
        OsdSampler::with_default_horizon(Mat::identity(2), LevySpec::brownian(2)).unwrap()
    }

    #[test]
    fn levy_increment_zero_and_drift() {
        let mut rng = Rng::new(1);
        let zero = levy_increment(&LevySpec::zero(2), 0.25, &mut rng);
        assert_eq!(zero, alloc::vec![0.0, 0.0]);

        let drift = LevySpec::new(alloc::vec![1.0, -2.0], Mat::zeros(2, 2), 0.0, None).unwrap();
        let inc = levy_increment(&drift, 0.1, &mut rng);
        assert!((inc[0] - 0.1).abs() < 1e-15);
        assert!((inc[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn levy_increment_gaussian_covariance() {
        let spec = LevySpec::brownian(2);
        let mut rng = Rng::new(5);
        let h = 0.3;
        let n = 100_000;
        let mut acc = Mat::zeros(2, 2);
        for _ in 0..n {
            let inc = levy_increment(&spec, h, &mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    acc[(i, j)] += inc[i] * inc[j];
                }
            }
        }
        let emp = acc.scale(1.0 / n as f64);
        assert!(emp.sub(&Mat::identity(2).scale(h)).max_abs() < 10.0 * h / sqrt(n as f64));
    }

    #[test]
    fn ou_step_zero_spec_is_pure_flow() {
        let q = Mat::from_rows(&[&[1.0, 0.2], &[0.0, 0.7]]);
        let mut rng = Rng::new(3);
        let z = [1.0, -1.0];
        let out = ou_step(&q, 0.5, &z, &LevySpec::zero(2), &mut rng).unwrap();
        let want = mat_exp(&q, -0.5).unwrap().matvec(&z);
        for i in 0..2 {
            assert!((out[i] - want[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn ou_drift_fixed_point_is_q_inverse_b() {
        // Pure drift b with Q = I: the chain converges to z* = Q^{-1} b = b.
        let b = alloc::vec![2.0, -0.5];
        let spec = LevySpec::new(b.clone(), Mat::zeros(2, 2), 0.0, None).unwrap();
        let q = Mat::identity(2);
        let mut rng = Rng::new(7);
        let mut z = alloc::vec![0.0, 0.0];
        for _ in 0..400 {
            z = ou_step(&q, 0.1, &z, &spec, &mut rng).unwrap();
        }
        for i in 0..2 {
            assert!((z[i] - b[i]).abs() < 1e-12, "fixed point {z:?}");
        }
    }

    #[test]
    fn sampler_rejects_bad_configurations() {
        // Horizon invariant violated.
        assert!(matches!(
            OsdSampler::new(Mat::identity(2), LevySpec::brownian(2), 0.1, 1.0),
            Err(BdlpError::HorizonTooShort { .. })
        ));
        // Unstable generator.
        assert!(matches!(
            OsdSampler::with_default_horizon(Mat::diag(&[1.0, -0.2]), LevySpec::brownian(2)),
            Err(BdlpError::GeneratorNotStable { .. })
        ));
    }

    #[test]
    fn zero_spec_samples_are_exactly_zero() {
        let sampler =
            OsdSampler::with_default_horizon(Mat::identity(2), LevySpec::zero(2)).unwrap();
        let samples = sample_osd(&sampler, 32, 5).unwrap();
        assert!(samples.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stationary_covariance_matches_lyapunov_oracle() {
        // Q = I, D = I: stationary covariance I/2 within 10/sqrt(N).
        let sampler = brownian_sampler();
        let n = 20_000;
        let samples = sample_osd(&sampler, n, 11).unwrap();
        let cov = samples.covariance();
        let tol = 10.0 / sqrt(n as f64);
        assert!(cov.sub(&Mat::identity(2).scale(0.5)).max_abs() < tol);
        let lyap = sampler.stationary_covariance().unwrap();
        assert!(lyap.sub(&Mat::identity(2).scale(0.5)).max_abs() < 1e-12);
    }

    #[test]
    fn pure_drift_draws_sit_at_q_inverse_b() {
        let levy = LevySpec::new(alloc::vec![2.0, -0.5], Mat::zeros(2, 2), 0.0, None).unwrap();
        let sampler = OsdSampler::with_default_horizon(Mat::identity(2), levy).unwrap();
        let samples = sample_osd(&sampler, 4, 1).unwrap();
        for i in 0..4 {
            assert!((samples.at(i)[0] - 2.0).abs() < 1e-6);
            assert!((samples.at(i)[1] + 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let sampler = brownian_sampler();
        let a = sample_osd(&sampler, 16, 77).unwrap();
        let b = sample_osd(&sampler, 16, 77).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn stationarity_under_one_more_step() {
        let sampler = brownian_sampler();
        let n = 40_000;
        let samples = sample_osd(&sampler, n, 13).unwrap();
        let stepper = OuStepper::new(&sampler.q, 0.25, &sampler.levy).unwrap();
        let mut data = samples.data().to_vec();
        for i in 0..n {
            let mut rng = Rng::stream(14, i as u64);
            let mut state = [data[2 * i], data[2 * i + 1]];
            stepper.step(&mut state, &sampler.levy, &mut rng);
            data[2 * i] = state[0];
            data[2 * i + 1] = state[1];
        }
        let pushed = Samples::new(n, 2, data);
        for z in default_z_grid(2, 4, &[0.5, 1.0, 2.0]) {
            let (ar, ai) = crate::clt::empirical_cf(&samples, &z);
            let (br, bi) = crate::clt::empirical_cf(&pushed, &z);
            assert!(
                hypot(ar - br, ai - bi) <= 4.0 / sqrt(n as f64),
                "CF moved at z = {z:?}"
            );
        }
    }

    #[test]
    fn distributional_flow_property() {
        // Two h-steps from zero equal one 2h-step from zero in law.
        let q = Mat::from_rows(&[&[1.0, 0.3], &[0.0, 0.8]]);
        let levy = LevySpec::brownian(2);
        let n = 40_000;
        let h = 0.4;
        let two = run_chain(&q, &levy, h, 2.0 * h, n, 21).unwrap();
        let one = run_chain(&q, &levy, 2.0 * h, 2.0 * h, n, 22).unwrap();
        for z in default_z_grid(2, 4, &[0.5, 1.0]) {
            let (ar, ai) = crate::clt::empirical_cf(&two, &z);
            let (br, bi) = crate::clt::empirical_cf(&one, &z);
            assert!(hypot(ar - br, ai - bi) <= 4.0 / sqrt(n as f64));
        }
    }

    #[test]
    fn factorization_gaussian_case() {
        let sampler = brownian_sampler();
        let n = 20_000;
        let samples = sample_osd(&sampler, n, 31).unwrap();
        let grid = default_z_grid(2, 8, &[0.5, 1.0, 2.0, 3.0]);
        let residual =
            factorization_check(&samples, sampler.q(), 1.0, &sampler, &grid, 32).unwrap();
        assert!(residual <= 0.05, "residual {residual}");

        // Cross-module consistency: exp(-tQ) is a member of the stationary
        // Gaussian law with positive margin.
        let law = GaussianLaw::centered(sampler.stationary_covariance().unwrap()).unwrap();
        let a = mat_exp(sampler.q(), -1.0).unwrap();
        let member = gaussian_membership(&law, &a, 1e-8);
        assert!(member.member && member.margin > 0.0);
    }

    #[test]
    fn factorization_rejects_corrupted_generator() {
        let sampler = brownian_sampler();
        let n = 20_000;
        let samples = sample_osd(&sampler, n, 41).unwrap();
        let grid = default_z_grid(2, 8, &[0.5, 1.0, 2.0, 3.0]);
        let wrong = sampler.q().scale(2.0);
        let residual = factorization_check(&samples, &wrong, 1.0, &sampler, &grid, 42).unwrap();
        assert!(residual > 0.15, "corrupted residual {residual}");
    }

    #[test]
    fn factorization_compound_poisson() {
        let levy = LevySpec::new(
            alloc::vec![0.0, 0.0],
            Mat::identity(2),
            1.0,
            Some(JumpLaw::Gaussian(GaussianLaw::standard(2))),
        )
        .unwrap();
        let sampler = OsdSampler::with_default_horizon(Mat::identity(2), levy).unwrap();
        let n = 20_000;
        let samples = sample_osd(&sampler, n, 51).unwrap();
        let grid = default_z_grid(2, 8, &[0.5, 1.0, 2.0, 3.0]);
        let residual =
            factorization_check(&samples, sampler.q(), 1.0, &sampler, &grid, 52).unwrap();
        assert!(residual <= 0.05, "cp residual {residual}");
        // Jump second moments enter the stationary covariance: I/2 + I/2.
        let emp = samples.covariance();
        let lyap = sampler.stationary_covariance().unwrap();
        assert!(lyap.sub(&Mat::identity(2)).max_abs() < 1e-12);
        assert!(emp.sub(&lyap).max_abs() < 20.0 / sqrt(n as f64));
    }

    #[test]
    fn fixed_jump_second_moment() {
        let j = JumpLaw::Fixed(alloc::vec![1.0, 2.0]);
        let m = j.second_moment();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(1, 1)], 4.0);
        assert_eq!(m[(0, 1)], 2.0);
    }

    #[test]
    fn partial_integral_variance_closed_form() {
        // Scalar Q = 1, D = 1: Var(nu_t) = (1 - e^{-2t})/2.
        let q = Mat::scalar(1, 1.0);
        let levy = LevySpec::brownian(1);
        let n = 40_000;
        let t = 0.7;
        let nu = sample_partial_integral(&q, &levy, 1.0 / 64.0, t, n, 61).unwrap();
        let want = (1.0 - exp(-2.0 * t)) / 2.0;
        let var = nu.covariance()[(0, 0)];
        assert!(fabs(var - want) < 10.0 * want / sqrt(n as f64));
    }
}
