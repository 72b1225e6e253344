//! Seed derivation for independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of indices into a master seed, so that e.g.
/// `(seed, iteration, model)` yields a stream independent of every other
/// path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
