//! Seeded, path-derived randomness.
//!
//! Every random draw in the crate comes from a [`RandomnessStream`] built from a
//! 64-bit master seed and a `(index, purpose)` path. Two streams with the same
//! seed and path replay the same draws; different paths are independent for
//! all practical purposes (distinct ChaCha keys or stream ids).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Part of the derivation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    LabelRandomization = 1,
    VectorRandomization = 2,
    Shuffle = 3,
    DataGeneration = 4,
    RiskEvaluation = 5,
    SignPattern = 6,
    GradientSets = 7,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of integers into one well-mixed 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |acc, &p| {
        splitmix64(acc.wrapping_add(GOLDEN) ^ splitmix64(p.wrapping_add(GOLDEN)))
    })
}

#[derive(Debug, Clone)]
pub struct RandomnessStream {
    rng: ChaCha8Rng,
}

impl RandomnessStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for `(index, purpose)` under `master_seed`. The purpose selects
    /// the key, the index selects the ChaCha stream id.
    pub fn derive(master_seed: u64, index: u64, purpose: Purpose) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[master_seed, purpose as u64]));
        rng.set_stream(index);
        Self { rng }
    }
}

impl RngCore for RandomnessStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
