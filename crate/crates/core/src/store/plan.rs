//! Coalesced read planning over row ranges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StoreError;

/// Half-open global row range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowRange {
    pub start: u64,
    pub end: u64,
}

impl RowRange {
    pub fn new(start: u64, end: u64) -> Self {
        RowRange { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl From<std::ops::Range<u64>> for RowRange {
    fn from(r: std::ops::Range<u64>) -> Self {
        RowRange::new(r.start, r.end)
    }
}

/// Rows `start..end` of a chunk, placed at `output_offset` in the result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkSlice {
    pub start: usize,
    pub end: usize,
    pub output_offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkRead {
    pub chunk_id: u64,
    /// Sorted by `start`, pairwise disjoint.
    pub slices: Vec<ChunkSlice>,
}

impl ChunkRead {
    /// Smallest within-chunk row span covering every slice.
    pub fn span(&self) -> std::ops::Range<usize> {
        self.slices[0].start..self.slices.iter().map(|s| s.end).max().unwrap()
    }
}

/// A read schedule that touches each chunk at most once, in chunk order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReadPlan {
    pub chunks: Vec<ChunkRead>,
    pub total_rows: usize,
}

impl ReadPlan {
    /// Flat `(chunk_id, within_chunk_start, within_chunk_end, output_offset)` view.
    pub fn entries(&self) -> impl Iterator<Item = (u64, usize, usize, usize)> + '_ {
        self.chunks.iter().flat_map(|c| {
            c.slices
                .iter()
                .map(move |s| (c.chunk_id, s.start, s.end, s.output_offset))
        })
    }

    pub fn chunk_ids(&self) -> Vec<u64> {
        self.chunks.iter().map(|c| c.chunk_id).collect()
    }
}

/// Plans a read of `ranges` (pairwise disjoint, any order) against a store
/// of `n_obs` rows chunked by `chunk_rows`. Output rows follow the order of
/// `ranges`.
pub fn plan_read(n_obs: u64, chunk_rows: u64, ranges: &[RowRange]) -> Result<ReadPlan, StoreError> {
    assert!(chunk_rows > 0);
    for r in ranges {
        if r.start >= r.end || r.end > n_obs {
            return Err(StoreError::OutOfBounds {
                start: r.start,
                end: r.end,
                n_obs,
            });
        }
    }
    let mut sorted: Vec<RowRange> = ranges.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(StoreError::Overlap(w[0], w[1]));
        }
    }

    let mut by_chunk: BTreeMap<u64, Vec<ChunkSlice>> = BTreeMap::new();
    let mut offset = 0usize;
    for r in ranges {
        let mut row = r.start;
        while row < r.end {
            let chunk = row / chunk_rows;
            let base = chunk * chunk_rows;
            let stop = r.end.min(base + chunk_rows);
            by_chunk.entry(chunk).or_default().push(ChunkSlice {
                start: (row - base) as usize,
                end: (stop - base) as usize,
                output_offset: offset,
            });
            offset += (stop - row) as usize;
            row = stop;
        }
    }
    let chunks = by_chunk
        .into_iter()
        .map(|(chunk_id, mut slices)| {
            slices.sort_unstable_by_key(|s| s.start);
            ChunkRead { chunk_id, slices }
        })
        .collect();
    Ok(ReadPlan {
        chunks,
        total_rows: offset,
    })
}
