//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator seeded from the master seed
//! mixed with a path of integer labels (shot index, noise axis, ...). The
//! mixing is SplitMix64 applied as a hash chain:
//!
//! ```text
//! s0 = splitmix64(master)
//! s_{i+1} = splitmix64(s_i ^ splitmix64(label_i + 0x9E3779B97F4A7C15))
//! ```
//!
//! Streams therefore depend only on `(master, labels)` and never on the order
//! in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Labels used to separate the noise streams of the two transverse axes.
pub const AXIS_X: u64 = 0;
pub const AXIS_Y: u64 = 1;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(master), |acc, &l| {
        splitmix64(acc ^ splitmix64(l.wrapping_add(GOLDEN)))
    })
}

pub fn rng_from(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, labels))
}
