//! Deterministic random streams.
//!
//! Every random draw in the crate comes from [`SplitMix64`], a counter-based
//! generator: the `k`-th output of a stream seeded with `s` is
//! `mix64(s + k * GAMMA)`, where `GAMMA = 0x9E37_79B9_7F4A_7C15` and `mix64` is
//! the SplitMix64 finalizer
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//! z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! (all arithmetic wrapping mod 2^64). Independent named streams are derived
//! from a master seed with [`derive_seed`], so the value of any draw depends
//! only on `(master seed, stream path)` and never on thread scheduling.

use rand_core::{impls, RngCore};

/// Weyl increment of the SplitMix64 counter.
pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer (a bijection on `u64`).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of stream identifiers.
///
/// `derive_seed(s, &[a, b])` folds as `h = mix64(s)`, then for each part
/// `h = mix64(h ^ mix64(part + GAMMA))`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |h, &part| {
        mix64(h ^ mix64(part.wrapping_add(GAMMA)))
    })
}

/// Stream tags used under a trial seed.
pub mod stream {
    pub const PROBLEM: u64 = 1;
    pub const MATRIX: u64 = 2;
    pub const GRADIENT: u64 = 3;
    pub const CHANNEL: u64 = 4;
    pub const SKETCH: u64 = 5;
    pub const SIGNAL: u64 = 6;
    pub const TRIAL: u64 = 7;
}

/// Counter-based SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Generator for the stream `derive_seed(seed, path)`.
    pub fn from_path(seed: u64, path: &[u64]) -> Self {
        SplitMix64::new(derive_seed(seed, path))
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `[0, bound)` by Lemire's multiply-and-reject method.
    ///
    /// Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
