//! Named deterministic random streams.
//!
//! Every subsystem that needs randomness draws from its own ChaCha8 stream.
//! The 32-byte ChaCha seed for `(seed, name)` is four consecutive SplitMix64
//! outputs started from `seed ^ fnv1a64(name)`. Both primitives are fully
//! specified bit-level algorithms, so streams are reproducible across
//! platforms and re-implementations.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream used for procedural world generation.
pub const WORLD_STREAM: &str = "world";
/// Stream used for fire placement during world generation.
pub const FIRE_STREAM: &str = "fire";
/// Stream used for sensor range noise.
pub const SENSOR_STREAM: &str = "sensor";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns the generator for stream `name` under the scenario `seed`.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut state = seed ^ fnv1a64(name.as_bytes());
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Uniform draw in `0..n` as `next_u64() % n`. The modulo bias is below
/// 2^-40 for the small ranges used here and keeps the draw sequence
/// trivially reproducible outside Rust.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "empty range");
    (rng.next_u64() % n as u64) as usize
}
