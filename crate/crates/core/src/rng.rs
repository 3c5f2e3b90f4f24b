//! Seeded, counter-based random streams.
//!
//! Every random object in the crate draws from a ChaCha8 keystream. The key
//! is derived from the user seed and the stream id is derived from a
//! [`Purpose`] tag, so two purposes never share words even under the same
//! seed:
//!
//! ```text
//! key    = splitmix64 expansion of `seed`
//! stream = splitmix64(purpose_tag << 32 | lane)
//! ```
//!
//! `lane` separates independent consumers of one purpose (for example the
//! nodes of a distributed run). Because ChaCha is a counter-mode generator, the
//! `k`-th 64-bit word of any stream can be read directly with
//! [`CounterStream::word_at`]; this is what lets dense projection matrices be
//! regenerated block-wise with the exact bits a materialized copy would hold.
//!
//! Gaussian variates use a single word each, mapped to `(0, 1)` by
//! [`unit_open`] and pushed through the inverse normal CDF
//! (`-sqrt(2) * erfc_inv(2u)`). One word per variate keeps the word index of
//! every matrix entry fixed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

/// What a stream is used for. The discriminant is part of the stream id and
/// must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    GaussianProjection = 1,
    RademacherProjection = 2,
    SparseDiscreteProjection = 3,
    HashBuckets = 4,
    HashSigns = 5,
    HadamardSigns = 6,
    HadamardSample = 7,
    Sampling = 8,
    Permutation = 9,
    Partition = 10,
    Synthetic = 11,
    Probes = 12,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_id(purpose: Purpose, lane: u32) -> u64 {
    splitmix64(((purpose as u64) << 32) | lane as u64)
}

/// A ChaCha8 keystream bound to one (seed, purpose, lane) triple.
#[derive(Clone, Debug)]
pub struct CounterStream {
    rng: ChaCha8Rng,
}

impl CounterStream {
    pub fn new(seed: u64, purpose: Purpose, lane: u32) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id(purpose, lane));
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Reads the `index`-th 64-bit word of the stream and leaves the cursor
    /// just after it.
    pub fn word_at(&mut self, index: u64) -> u64 {
        self.rng.set_word_pos(2 * index as u128);
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        unit_open(self.next_u64())
    }

    pub fn gaussian(&mut self) -> f64 {
        standard_normal(self.next_u64())
    }

    /// Uniform integer in `0..bound` by Lemire's multiply-shift; the tiny
    /// modulo bias is irrelevant at the bounds used here.
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Fisher-Yates shuffle drawing one word per swap.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Maps a word to the open interval (0, 1) using its top 53 bits.
pub fn unit_open(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF normal variate. The upper half is evaluated through the
/// mirrored word so both tails keep full precision.
pub fn standard_normal(word: u64) -> f64 {
    if word >> 63 == 0 {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * unit_open(word))
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * unit_open(!word))
    }
}
