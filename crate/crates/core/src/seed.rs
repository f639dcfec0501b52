//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a tuple of integers mixed
//! through SplitMix64, so a run is reproducible from its master seed no
//! matter which worker executes it or in which order results arrive.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain tag separating disorder streams from trajectory streams.
pub const DISORDER_STREAM: u64 = 0x6469_736f_7264_6572;
pub const TRAJECTORY_STREAM: u64 = 0x7472_616a_6563_7479;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an ordered list of words into one 64-bit seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    let mut state = splitmix64(GOLDEN ^ words.len() as u64);
    for &w in words {
        state = splitmix64(state.wrapping_add(GOLDEN) ^ w);
    }
    state
}

/// Key for a parameter point, built from the bit patterns of its rates so it
/// does not depend on the point's position in a sweep grid.
pub fn point_key(delta: f64, gamma: f64, big_gamma: f64) -> u64 {
    // +0.0 and -0.0 must map to the same key.
    let bits = |x: f64| if x == 0.0 { 0 } else { x.to_bits() };
    derive_seed(&[bits(delta), bits(gamma), bits(big_gamma)])
}

pub fn disorder_seed(master_seed: u64, disorder_index: u64) -> u64 {
    derive_seed(&[master_seed, DISORDER_STREAM, disorder_index])
}

pub fn trajectory_seed(
    master_seed: u64,
    point_key: u64,
    disorder_index: u64,
    trajectory_index: u64,
) -> u64 {
    derive_seed(&[
        master_seed,
        TRAJECTORY_STREAM,
        point_key,
        disorder_index,
        trajectory_index,
    ])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
