//! Seeded random streams.
//!
//! Every random decision in the crate draws from a ChaCha8 generator keyed by
//! the user seed, with a distinct stream per purpose and index, so results
//! are reproducible and independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator, recorded alongside shuffled outputs.
pub const PRNG_NAME: &str = "chacha8";

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    ShuffleBlocks = 1,
    ShuffleRound = 2,
    EpochBlocks = 3,
    BufferDraws = 4,
    RowRandom = 5,
    Synth = 6,
    VerifySample = 7,
    NullModel = 8,
}

/// Generator for `(seed, purpose, index)`; `index` must be below 2^56.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    debug_assert!(index < 1 << 56);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | index);
    rng
}
