//! Counter-based, splittable random streams.
//!
//! Every random draw in the library is addressed by a [`StreamKey`] derived
//! from `(base seed, replica id, purpose, node)`. A stream is a pure function
//! of its key, so results never depend on traversal order or on how replicas
//! are distributed over worker threads.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream purposes, mixed into keys so that different consumers of the same
/// replica never share randomness.
pub mod tag {
    pub const FIELD: u64 = 0x4649_454c_44;
    pub const BBM: u64 = 0x4242_4d;
    pub const PAIRS: u64 = 0x5041_4952_53;
    pub const SETS: u64 = 0x5345_5453;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x6766_665f_7468_696e))
    }

    /// Key of replica `replica` under base seed `seed`.
    pub fn replica(seed: u64, replica: u64) -> Self {
        Self::from_seed(seed).derive(replica)
    }

    /// Child key; `derive` is injective in practice and order-sensitive.
    pub fn derive(self, label: u64) -> Self {
        StreamKey(mix64(
            self.0.rotate_left(17) ^ mix64(label.wrapping_add(GOLDEN)),
        ))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn stream(self) -> CounterStream {
        CounterStream {
            key: self.0,
            counter: 0,
        }
    }
}

/// SplitMix64 evaluated at `key + i * GOLDEN` for `i = 1, 2, ...`.
#[derive(Clone, Debug)]
pub struct CounterStream {
    key: u64,
    counter: u64,
}

impl CounterStream {
    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}

impl RngCore for CounterStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn streams_are_pure_functions_of_key() {
        let key = StreamKey::replica(7, 3).derive(tag::BBM);
        let a: Vec<u64> = (0..16)
            .map({
                let mut s = key.stream();
                move |_| s.next_u64()
            })
            .collect();
        let mut s = key.stream();
        let b: Vec<u64> = (0..16).map(|_| s.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_keys_differ() {
        let base = StreamKey::from_seed(1);
        assert_ne!(base.derive(0), base.derive(1));
        assert_ne!(base.derive(1).derive(2), base.derive(2).derive(1));
        assert_ne!(StreamKey::replica(1, 0), StreamKey::replica(0, 1));
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut s = StreamKey::from_seed(42).stream();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.sample::<f64, _>(StandardNormal)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.015);
        let u: f64 = s.open01();
        assert!(u > 0.0 && u < 1.0);
    }
}
