//! Seeded determinism utilities.
//!
//! All randomness in the crate flows from one 64-bit seed. Generators are
//! xoshiro256** instances created with `seed_from_u64`, which expands the
//! 64-bit value through SplitMix64 (the scheme documented by `rand_xoshiro`).
//! Independent streams for different purposes are derived by mixing the base
//! seed with a fixed purpose tag and a stream index:
//!
//! ```text
//! sub_seed = splitmix64(splitmix64(seed ^ tag) ^ index)
//! ```
//!
//! Identical seed plus identical call sequence yields bit-identical streams.

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

/// Base seed for a deterministic run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub u64);

/// Fixed purpose tags for sub-seed derivation. Each independent consumer of
/// randomness gets its own tag so that streams never alias.
pub mod tag {
    /// Network parameter initialization.
    pub const NET_INIT: u64 = u64::from_le_bytes(*b"netinit\0");
    /// Training loop: batch shuffling and prior draws.
    pub const TRAIN: u64 = u64::from_le_bytes(*b"train\0\0\0");
    /// Dataset train/validation/test splits.
    pub const SPLIT: u64 = u64::from_le_bytes(*b"split\0\0\0");
    /// Outlier injection into validation sets.
    pub const INJECT_VAL: u64 = u64::from_le_bytes(*b"injval\0\0");
    /// Outlier injection into test sets.
    pub const INJECT_TEST: u64 = u64::from_le_bytes(*b"injtest\0");
    /// Synthetic dataset generation.
    pub const SYNTH: u64 = u64::from_le_bytes(*b"synth\0\0\0");
    /// Per-class derivation when one run covers several inlier classes.
    pub const CLASS: u64 = u64::from_le_bytes(*b"class\0\0\0");
}

/// SplitMix64 finalizer; the standard constants from the reference
/// implementation.
#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl Seed {
    /// Derives the seed for an independent purpose-specific stream.
    pub fn derive(self, tag: u64, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0 ^ tag) ^ index))
    }

    /// Creates the generator for this seed.
    pub fn rng(self) -> Xoshiro256StarStar {
        Xoshiro256StarStar::seed_from_u64(self.0)
    }
}
