//! Seed derivation.
//!
//! Every random stream in the lab is a ChaCha8 generator keyed by a `u64`
//! derived from a parent seed and a few integer coordinates. The mixing is
//! fixed here so results do not depend on the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent` and an ordered list of coordinates.
pub fn derive(parent: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix(parent), |acc, &c| splitmix(acc ^ splitmix(c)))
}

/// Stable 64-bit FNV-1a hash of a label, for mixing names into seeds.
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
