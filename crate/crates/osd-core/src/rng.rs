//! Deterministic random number generation.
//!
//! All simulation output must be bit-exactly reproducible from a 64-bit seed,
//! and independent streams (one per replica or per draw) must be derivable by
//! counter so that parallel and serial fills agree. A self-contained
//! xoshiro256** generator seeded through SplitMix64 keeps that contract
//! independent of external crate version churn.

use libm::{cos, log, sin, sqrt};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// xoshiro256** with a Box-Muller cache for normal draws.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    cached_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng {
            s,
            cached_normal: None,
        }
    }

    /// Independent stream derived from `(seed, stream)` by counter.
    ///
    /// Streams with distinct indices are statistically independent; the same
    /// index always yields the same stream.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut sm = seed ^ stream.wrapping_mul(GOLDEN_GAMMA);
        // One extra mix so that (seed, 0) differs from Rng::new(seed).
        let _ = splitmix64(&mut sm);
        Rng::new(splitmix64(&mut sm))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller, pairs cached).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // Reject u1 == 0 so the log stays finite.
        let mut u1 = self.next_f64();
        while u1 <= 0.0 {
            u1 = self.next_f64();
        }
        let u2 = self.next_f64();
        let r = sqrt(-2.0 * log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.cached_normal = Some(r * sin(theta));
        r * cos(theta)
    }

    /// Poisson draw by Knuth's product method; splits large means so the
    /// running product never underflows.
    pub fn next_poisson(&mut self, mean: f64) -> u64 {
        assert!(mean >= 0.0 && mean.is_finite(), "poisson mean must be finite and >= 0");
        if mean == 0.0 {
            return 0;
        }
        if mean > 30.0 {
            let half = mean / 2.0;
            return self.next_poisson(half) + self.next_poisson(mean - half);
        }
        let limit = libm::exp(-mean);
        let mut product = self.next_f64();
        let mut count = 0u64;
        while product > limit {
            count += 1;
            product *= self.next_f64();
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn deterministic_streams() {
        let a: Vec<u64> = {
            let mut r = Rng::stream(7, 3);
            (0..16).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = Rng::stream(7, 3);
            (0..16).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut r = Rng::stream(7, 4);
            (0..16).map(|_| r.next_u64()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_moments() {
        let mut r = Rng::new(42);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sq += u * u;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.005);
        assert!((var - 1.0 / 12.0).abs() < 0.005);
    }

    #[test]
    fn normal_moments() {
        let mut r = Rng::new(1);
        let n = 200_000;
        let (mut sum, mut sq, mut quad) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = r.next_normal();
            sum += z;
            sq += z * z;
            quad += z * z * z * z;
        }
        assert!((sum / n as f64).abs() < 0.02);
        assert!((sq / n as f64 - 1.0).abs() < 0.02);
        // Fourth moment of a standard normal is 3.
        assert!((quad / n as f64 - 3.0).abs() < 0.1);
    }

    #[test]
    fn poisson_moments() {
        let mut r = Rng::new(5);
        for &mean in &[0.05, 1.5, 80.0] {
            let n = 100_000;
            let total: u64 = (0..n).map(|_| r.next_poisson(mean)).sum();
            let emp = total as f64 / n as f64;
            assert!(
                (emp - mean).abs() < 0.05 * (mean + 1.0),
                "poisson mean {mean}: got {emp}"
            );
        }
        assert_eq!(Rng::new(9).next_poisson(0.0), 0);
    }
}
