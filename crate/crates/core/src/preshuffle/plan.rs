use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ShuffleError;
use crate::rng::{self, Purpose};
use crate::store::RowRange;

/// Randomized block schedule for one shuffle pass.
///
/// Rows `0..total_rows` are cut into blocks of `block_rows` (the last may be
/// short); the blocks are permuted and packed greedily into rounds holding at
/// most `buffer_rows` rows each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShufflePlan {
    pub seed: u64,
    pub block_rows: u64,
    pub buffer_rows: u64,
    pub total_rows: u64,
    pub rounds: Vec<Vec<u64>>,
}

impl ShufflePlan {
    pub fn block_count(&self) -> u64 {
        self.total_rows.div_ceil(self.block_rows)
    }

    pub fn block_range(&self, block: u64) -> RowRange {
        let start = block * self.block_rows;
        RowRange::new(start, (start + self.block_rows).min(self.total_rows))
    }

    pub fn round_rows(&self, round: usize) -> u64 {
        self.rounds[round].iter().map(|&b| self.block_range(b).len()).sum()
    }

    /// Global source rows of round `round` in the order they are written.
    pub fn round_order(&self, round: usize) -> Vec<u64> {
        let mut rows: Vec<u64> = self.rounds[round]
            .iter()
            .flat_map(|&b| {
                let r = self.block_range(b);
                r.start..r.end
            })
            .collect();
        rows.shuffle(&mut rng::stream(self.seed, Purpose::ShuffleRound, round as u64));
        rows
    }

    /// Global source row of every output row.
    pub fn output_order(&self) -> Vec<u64> {
        (0..self.rounds.len()).flat_map(|r| self.round_order(r)).collect()
    }
}

pub fn plan_shuffle(
    total_rows: u64,
    block_rows: u64,
    buffer_rows: u64,
    seed: u64,
) -> Result<ShufflePlan, ShuffleError> {
    if block_rows == 0 {
        return Err(ShuffleError::InvalidPlan("block_rows must be >= 1".into()));
    }
    if buffer_rows < block_rows {
        return Err(ShuffleError::InvalidPlan(format!(
            "buffer_rows ({buffer_rows}) must be >= block_rows ({block_rows})"
        )));
    }
    let n_blocks = total_rows.div_ceil(block_rows);
    let mut order: Vec<u64> = (0..n_blocks).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::ShuffleBlocks, 0));

    let len = |b: u64| (b * block_rows + block_rows).min(total_rows) - b * block_rows;
    let mut rounds = Vec::new();
    let mut current = Vec::new();
    let mut rows = 0;
    for b in order {
        if rows + len(b) > buffer_rows {
            rounds.push(std::mem::take(&mut current));
            rows = 0;
        }
        rows += len(b);
        current.push(b);
    }
    if !current.is_empty() {
        rounds.push(current);
    }
    Ok(ShufflePlan {
        seed,
        block_rows,
        buffer_rows,
        total_rows,
        rounds,
    })
}
