//! Seed derivation: one independent generator stream per environment index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere randomness is needed.
pub type GridRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `stream` from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(GOLDEN).rotate_left(17) ^ stream)
}

/// Derives a seed under a named domain, so unrelated consumers of the same
/// base seed (generator, agents) never share a stream.
pub fn derive_named(base: u64, domain: &str, stream: u64) -> u64 {
    let tag = domain.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    });
    derive_seed(derive_seed(base, tag), stream)
}

pub fn rng_from_seed(seed: u64) -> GridRng {
    GridRng::seed_from_u64(seed)
}
