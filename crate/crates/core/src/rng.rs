//! Seeded random streams.
//!
//! Every stochastic operation takes a plain `u64` seed. Experiments that need
//! several independent streams derive them with [`substream_seed`], which
//! hashes `(master seed, module tag, point index)` through SplitMix64, so a
//! given point sees the same stream no matter how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for a seed.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed of the `index`-th stream tagged `tag` under `master`.
pub fn substream_seed(master: u64, tag: &str, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ fnv1a(tag));
    splitmix64(b ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::Open01)
}
