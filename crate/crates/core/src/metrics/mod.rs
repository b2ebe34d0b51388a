//! Throughput and randomness measurement.
//!
//! Wall-clock numbers depend on the host and its page cache; the read
//! counters and the statistics are deterministic and are what tests assert.

mod randomness;
mod sweep;
mod throughput;

pub use randomness::{
    decile_chi_square, expected_pair_rate, randomness_report, rank_correlation,
    same_block_pair_rate, RandomnessOptions, RandomnessReport, METRIC_NAME,
};
pub use sweep::{sweep, SkippedPoint, SweepParameter, SweepTable};
pub use throughput::{run_throughput, CacheMode, Strategy, ThroughputReport};

use crate::preshuffle::{plan_shuffle, ShuffleError};

/// Output order of one pre-shuffle pass over `n` rows, without touching disk.
pub fn simulate_shuffle_order(
    n: u64,
    block_rows: u64,
    buffer_rows: u64,
    seed: u64,
) -> Result<Vec<u64>, ShuffleError> {
    Ok(plan_shuffle(n, block_rows, buffer_rows, seed)?.output_order())
}
