//! Random streams and the seed derivation chain.
//!
//! Every cycle sample is cut into fixed-size chunks. Chunk `j` draws from
//! its own stream seeded by `derive_seed(master, j)`, so the merged sample
//! does not depend on how many threads processed the chunks.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

/// One step of the SplitMix64 generator: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for substream `index` of `master`.
///
/// The chain is `s0 = splitmix64(master)`, then `index` is folded in and
/// mixed twice. Documented in `docs/seeding.md`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut state = master;
    let s0 = splitmix64(&mut state);
    let mut state = s0 ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

/// Explicitly passed source of randomness for samplers and the cycle engine.
#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: Xoshiro256PlusPlus,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Substream `index` of the master seed.
    pub fn substream(master: u64, index: u64) -> Self {
        Self::new(derive_seed(master, index))
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard exponential draw by inversion.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        -self.open01().ln()
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
