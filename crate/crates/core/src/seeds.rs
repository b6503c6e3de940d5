//! Seed derivation for named RNG substreams.
//!
//! All randomness in the pipeline flows from a single `u64` seed. Each stage
//! and each example owns its own ChaCha stream so results are replayable and
//! independent of execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the stage name; stable across platforms.
fn stage_hash(stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for a (seed, stage, example) triple.
///
/// The base seed selects the ChaCha key, the stage/example pair selects the
/// stream, so distinct stages and examples never share output.
pub fn substream(seed: u64, stage: &str, example: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage_hash(stage) ^ example.rotate_left(32));
    rng
}
