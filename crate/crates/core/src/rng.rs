//! Seeded, forkable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream forked off the
//! run seed with a fixed string label (`"trial/ball/p50/r1/finger0"` and the
//! like). Forking is a pure function of `(seed, label)`, so adding a consumer
//! or reordering work never perturbs another stream, and identical configs
//! replay bit-identical randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes. Stable by definition (not tied to `std`
/// hashing internals, which make no cross-version promise).
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer to decorrelate nearby seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the sub-seed for `label` under `seed` without constructing an RNG.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(label.as_bytes()))
}

/// Fork a named random stream off a run seed.
pub fn fork(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}
