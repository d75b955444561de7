//! Deterministic random streams.
//!
//! Every random quantity in the harness comes from a ChaCha stream keyed by a
//! tuple of integers (a run seed plus whatever identifies the draw), so that
//! results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The random stream handed to engines.
pub type EngineRng = ChaCha8Rng;

/// Folds a key tuple into a single 64-bit seed.
pub fn mix(key: &[u64]) -> u64 {
    key.iter()
        .fold(GOLDEN, |acc, &k| splitmix(acc ^ splitmix(k)))
}

/// A ChaCha stream keyed by `key`.
pub fn stream(key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(key))
}

/// Domain tags keep streams for different purposes disjoint.
pub(crate) mod tag {
    pub const FOLD_NOISE: u64 = 0x6e6f_6973;
    pub const ENGINE: u64 = 0x656e_6769;
    pub const RANDOM_DRAW: u64 = 0x6472_6177;
}
