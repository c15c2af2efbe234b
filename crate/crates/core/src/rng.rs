//! Named random streams.
//!
//! Every stochastic consumer gets its own stream keyed by
//! `(global seed, purpose tag, indices...)`. The key is folded through a
//! SplitMix64 finalizer into a ChaCha8 seed, so a stream's output depends
//! only on its key and never on how many draws other consumers made.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fold(state: u64, word: u64) -> u64 {
    mix(state ^ mix(word))
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01B3)
    })
}

/// Identity of a random stream. Cheap to copy and extend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(mix(seed))
    }

    pub fn tag(self, tag: &str) -> Self {
        StreamKey(fold(self.0, tag_hash(tag)))
    }

    pub fn index(self, i: u64) -> Self {
        StreamKey(fold(self.0 ^ 0xA5A5_A5A5_A5A5_A5A5, i))
    }

    pub fn stream(self) -> RngStream {
        RngStream::from_key(self)
    }
}

/// A deterministic generator bound to a [`StreamKey`].
#[derive(Clone, Debug)]
pub struct RngStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_key(key: StreamKey) -> Self {
        let mut seed = [0u8; 32];
        let mut s = key.0;
        for chunk in seed.chunks_mut(8) {
            s = mix(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        RngStream {
            key,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
