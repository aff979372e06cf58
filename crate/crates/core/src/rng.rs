//! Seed derivation for independent, schedule-free RNG streams.
//!
//! Every parallel unit of work (an event, a tree, a fold) gets its own
//! generator seeded from `(master seed, stream path)`, so results never
//! depend on which worker thread ran which unit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of stream indices into a child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0xA5A5))))
}

/// Generator for the stream at `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}

/// Domain tags keep streams for unrelated purposes apart.
pub(crate) mod tag {
    pub const EVENT: u64 = 1;
    pub const LABELS: u64 = 2;
    pub const TREE: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const PIV_NOISE: u64 = 6;
    pub const SHUFFLE: u64 = 7;
}
