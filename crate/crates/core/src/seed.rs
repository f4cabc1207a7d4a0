//! Counter-based seed derivation.
//!
//! Every random quantity in the crate is a pure function of a small key
//! (master seed, stream tag, trial index, site coordinates). Keys are folded
//! into a 64-bit value with the SplitMix64 finalizer and used to seed a
//! ChaCha generator, so results never depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `word` into the running key `acc`.
pub fn mix(acc: u64, word: u64) -> u64 {
    finalize(acc.wrapping_add(GOLDEN).wrapping_add(finalize(word.wrapping_add(GOLDEN))))
}

/// Stable 64-bit tag of a string (FNV-1a), used to separate streams by name.
pub fn tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the named stream under `master`.
pub fn stream_seed(master: u64, stream: &str) -> u64 {
    mix(master, tag(stream))
}

/// Seed for trial `trial` of the stream `stream` under `master`.
///
/// A field seeded with `stream_seed(master, stream)` draws trial `trial`
/// from keys that start with exactly this value.
pub fn trial_seed(master: u64, stream: &str, trial: u64) -> u64 {
    mix(stream_seed(master, stream), trial)
}

/// Key for the driving variable at `site` in trial `trial`.
pub fn site_key(seed: u64, trial: u64, site: &[i64]) -> u64 {
    let base = mix(mix(seed, trial), site.len() as u64);
    site.iter().fold(base, |acc, &c| mix(acc, c as u64))
}

/// Deterministic generator for an arbitrary key.
pub fn rng_for(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}

/// One uniform draw in `[0, 1)` for `key`.
pub fn uniform(key: u64) -> f64 {
    rng_for(key).random::<f64>()
}
