//! Seeded, counter-based random number streams.
//!
//! Every source of randomness in the engine is an [`RngStream`] addressed by
//! a `(seed, stream_id)` pair. The i-th draw of a stream is a pure function
//! of `(seed, stream_id, i)`, so independent components (per-cluster prompt
//! initialization, per-epoch batch orders, per-class synthetic templates) can
//! draw from their own streams in any schedule and still reproduce bit-exact
//! results.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64-bit finalizer with full avalanche (splitmix64's mixing function).
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Well-known stream domains, kept in one place so two components can never
/// collide on a stream id by accident.
pub mod domain {
    pub const PARTITION_CLASS: u64 = 1;
    pub const SYNTH_TEMPLATE: u64 = 2;
    pub const SYNTH_NOISE: u64 = 3;
    pub const PRETRAIN_INIT: u64 = 4;
    pub const PRETRAIN_ORDER: u64 = 5;
    pub const PRETRAIN_SEED: u64 = 6;
    pub const CLUSTER_SAMPLE: u64 = 7;
    pub const PROMPT_INIT: u64 = 8;
    pub const TUNE_ORDER: u64 = 9;
    pub const RANDOM_GROUPS: u64 = 10;
    pub const SHARED_HEAD_INIT: u64 = 11;
    pub const SHARED_HEAD_ORDER: u64 = 12;
    pub const RATIO_SWEEP: u64 = 13;
    pub const UNLEARN_PICK: u64 = 14;
}

/// Combine a domain tag and an index (cluster id, class id, epoch, ...) into
/// a stream id. Indexes are assumed to fit in 48 bits, which desk-scale runs
/// never exceed.
#[inline]
pub fn stream_id(domain: u64, index: u64) -> u64 {
    (domain << 48) ^ (index & 0x0000_ffff_ffff_ffff)
}

/// Derive a fresh 64-bit seed for a sub-component from a parent seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    RngStream::new(seed, stream_id(domain, index)).next_u64()
}

/// A splittable counter-based generator: draw `i` is `mix(key + (i+1)·φ)`
/// where `key` is derived from `(seed, stream_id)`. Identical across runs
/// and platforms; distinct stream ids give statistically independent
/// sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix(mix(seed ^ 0x517c_c1b7_2722_0a95).wrapping_add(stream_id.wrapping_mul(GOLDEN)));
        RngStream { seed, stream_id, counter: 0, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let i = self.counter;
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Standard normal via Box-Muller; two draws per value.
    pub fn next_gaussian(&mut self) -> f64 {
        // Shift into (0, 1] so the log never sees zero.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, n)` via 128-bit multiply; bias is below one
    /// part in 2^64 and irrelevant at desk scale.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// A seeded permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seed_and_stream_replay_identically() {
        let mut a = RngStream::new(0xdead_beef, 17);
        let mut b = RngStream::new(0xdead_beef, 17);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_diverge() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        let va: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_ne!(va, vb);
        // Crude independence check: matching words should be absent.
        assert_eq!(va.iter().zip(&vb).filter(|(x, y)| x == y).count(), 0);
    }

    #[test]
    fn f64_draws_stay_in_unit_interval() {
        let mut r = RngStream::new(1, 2);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn uniform_in_respects_bounds() {
        let mut r = RngStream::new(3, 4);
        for _ in 0..10_000 {
            let x = r.uniform_in(-0.05, 0.05);
            assert!((-0.05..0.05).contains(&x));
        }
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let mut r = RngStream::new(11, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| r.next_gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = RngStream::new(5, 6);
        let mut xs: Vec<usize> = (0..1000).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..1000).collect::<Vec<_>>());
        assert_ne!(xs, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn next_below_stays_in_range() {
        let mut r = RngStream::new(9, 9);
        for _ in 0..10_000 {
            assert!(r.next_below(7) < 7);
        }
    }

    #[test]
    fn derive_seed_is_stable_and_namespaced() {
        let a = derive_seed(42, domain::TUNE_ORDER, 3);
        let b = derive_seed(42, domain::TUNE_ORDER, 3);
        let c = derive_seed(42, domain::TUNE_ORDER, 4);
        let d = derive_seed(42, domain::PROMPT_INIT, 3);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
