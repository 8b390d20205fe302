//! Seeded pseudo-randomness with a pinned, platform-independent algorithm.
//!
//! The generator is xoshiro256++ seeded through splitmix64, with normal
//! deviates produced by the basic Box–Muller transform. The exact algorithm
//! matters: acceptance tests pin seeds, so the stream for a given seed is part
//! of the crate's contract and must never change. Parallel work derives child
//! generators with [`Rng::child`], a splitmix64 mix of the root seed and a
//! stream id, so results are independent of how work is scheduled.

use crate::error::{Error, Result};
use alloc::vec::Vec;
use libm::{cos, log, sin, sqrt};

const GOLDEN: u64 = 0x9e3779b97f4a7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random generator (xoshiro256++).
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    state: [u64; 4],
}

impl Rng {
    /// Create a generator from a 64-bit seed. Equal seeds produce equal
    /// streams on every platform.
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { seed, state }
    }

    /// The seed this generator was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child generator for a parallel stream. Derived from the root seed and
    /// the stream id only, never from consumed state, so `child(i)` is the
    /// same no matter how much of `self` has been used.
    pub fn child(&self, stream: u64) -> Rng {
        let mut sm = self.seed ^ GOLDEN;
        let a = splitmix64(&mut sm);
        let mut sm2 = a ^ stream.wrapping_mul(0xd1342543de82ef95).wrapping_add(1);
        Rng::new(splitmix64(&mut sm2))
    }

    /// Next raw 64-bit value (xoshiro256++ step).
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound). `bound` must be positive.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        // Multiply-shift; the modulo bias is < 2^-64 * bound, irrelevant here.
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// One standard-normal deviate. Basic Box–Muller without caching, so the
    /// stream position is a pure function of the number of calls made.
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let r = sqrt(-2.0 * log(u1));
        r * cos(2.0 * core::f64::consts::PI * u2)
    }

    /// A Box–Muller pair, for bulk sampling.
    fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let r = sqrt(-2.0 * log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        (r * cos(theta), r * sin(theta))
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// A uniformly random permutation of [0, len).
    pub fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..len).collect();
        self.shuffle(&mut perm);
        perm
    }
}

/// Draw `count` i.i.d. samples from N(mean, std^2).
pub fn normal_sample(rng: &mut Rng, mean: f64, std: f64, count: usize) -> Result<Vec<f64>> {
    if std <= 0.0 || !std.is_finite() {
        return Err(Error::InvalidParam(alloc::format!(
            "normal_sample requires std > 0, got {std}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParam("normal_sample requires count >= 1".into()));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() + 2 <= count {
        let (a, b) = rng.normal_pair();
        out.push(mean + std * a);
        out.push(mean + std * b);
    }
    if out.len() < count {
        let (a, _) = rng.normal_pair();
        out.push(mean + std * a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let mut a = Rng::new(0xdead_beef);
        let mut b = Rng::new(0xdead_beef);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn pinned_stream_head() {
        // Freezes the generator algorithm: if these change, every seeded
        // result in the crate changes with them.
        let mut r = Rng::new(42);
        let head: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(
            head,
            alloc::vec![
                15021278609987233951,
                5881210131331364753,
                18149643915985481100,
                12933668939759105464,
            ]
        );
    }

    #[test]
    fn normal_sample_law_of_large_numbers() {
        // Sample mean within ±0.005 of 0 for one million standard normals.
        let mut rng = Rng::new(1);
        let xs = normal_sample(&mut rng, 0.0, 1.0, 1_000_000).unwrap();
        let (mean, var) = mean_var(&xs);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn normal_sample_variance_scaling() {
        // Sample variance within ±2% of 0.01 for std = 0.1.
        let mut rng = Rng::new(2);
        let xs = normal_sample(&mut rng, 0.0, 0.1, 1_000_000).unwrap();
        let (_, var) = mean_var(&xs);
        assert!((var - 0.01).abs() < 0.0002, "var {var}");
    }

    #[test]
    fn normal_sample_single_deterministic() {
        let one = |seed| {
            let mut rng = Rng::new(seed);
            normal_sample(&mut rng, 5.0, 1.0, 1).unwrap()[0]
        };
        assert_eq!(one(7), one(7));
        assert_ne!(one(7), one(8));
    }

    #[test]
    fn normal_sample_rejects_bad_params() {
        let mut rng = Rng::new(0);
        assert!(normal_sample(&mut rng, 0.0, 0.0, 10).is_err());
        assert!(normal_sample(&mut rng, 0.0, -1.0, 10).is_err());
        assert!(normal_sample(&mut rng, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn children_are_order_independent() {
        let root = Rng::new(99);
        let mut used = Rng::new(99);
        for _ in 0..100 {
            used.next_u64();
        }
        let mut c1 = root.child(3);
        let mut c2 = used.child(3);
        assert_eq!(c1.next_u64(), c2.next_u64());
        let mut c3 = root.child(4);
        assert_ne!(c1.next_u64(), c3.next_u64());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = Rng::new(5);
        let mut v: Vec<usize> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut rng = Rng::new(6);
        let mut seen = [false; 10];
        for _ in 0..1000 {
            let k = rng.below(10);
            assert!(k < 10);
            seen[k] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
