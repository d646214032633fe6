//! Seed derivation shared by every randomized procedure.
//!
//! All sub-streams are derived from a master seed through a SplitMix64
//! finalizer, so a record can be regenerated from its own seed alone and
//! results never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `hash64(master, setting, record)`.
pub fn hash64(master: u64, setting: u64, record: u64) -> u64 {
    let a = mix(master.wrapping_add(GOLDEN));
    let b = mix(a ^ setting.wrapping_add(GOLDEN.wrapping_mul(2)));
    mix(b ^ record.wrapping_add(GOLDEN.wrapping_mul(3)))
}

/// Derive a child seed from a parent and a stream tag.
pub fn derive(parent: u64, tag: u64) -> u64 {
    hash64(parent, tag, 0x5EED)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
