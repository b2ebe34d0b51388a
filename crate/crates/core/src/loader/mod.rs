//! Shuffled minibatch loading.
//!
//! Each epoch visits the store as a seeded permutation of contiguous fetch
//! blocks. Fetched rows land in a bounded shuffle buffer; every emitted row
//! is a uniformly drawn buffer slot, which is then filled by swapping in the
//! newest row. Blocks can be fetched ahead on a background thread without
//! changing the output: the batch stream depends only on the store contents,
//! the config and the epoch index.

mod buffer;
mod source;

use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Purpose, Rng};
use crate::store::{IoStats, RowBlock, RowRange, StoreError};
use buffer::ShuffleBuffer;
pub use source::{MemorySource, RowSource};

#[derive(Debug, thiserror::Error)]
pub enum LoaderError {
    #[error("invalid loader config: {0}")]
    InvalidConfig(String),
    #[error("fetching block {block} (rows {}..{}): {source}", .range.start, .range.end)]
    Fetch {
        block: usize,
        range: RowRange,
        #[source]
        source: StoreError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoaderConfig {
    pub fetch_block_rows: u64,
    pub buffer_capacity_rows: u64,
    pub batch_rows: u64,
    pub seed: u64,
    /// Blocks fetched ahead of the consumer; 0 fetches inline.
    pub prefetch_depth: usize,
    pub drop_last: bool,
    pub cache_bypass: bool,
}

impl LoaderConfig {
    /// No prefetch, partial final batch kept, cached reads.
    pub fn new(fetch_block_rows: u64, buffer_capacity_rows: u64, batch_rows: u64, seed: u64) -> Self {
        LoaderConfig {
            fetch_block_rows,
            buffer_capacity_rows,
            batch_rows,
            seed,
            prefetch_depth: 0,
            drop_last: false,
            cache_bypass: false,
        }
    }

    pub fn validate(&self) -> Result<(), LoaderError> {
        let (f, cap, b) = (self.fetch_block_rows, self.buffer_capacity_rows, self.batch_rows);
        if f == 0 {
            return Err(LoaderError::InvalidConfig("fetch_block_rows must be >= 1".into()));
        }
        if cap < f {
            return Err(LoaderError::InvalidConfig(format!(
                "buffer_capacity_rows ({cap}) must be >= fetch_block_rows ({f})"
            )));
        }
        if b == 0 || b > cap {
            return Err(LoaderError::InvalidConfig(format!(
                "batch_rows ({b}) must be in 1..=buffer_capacity_rows ({cap})"
            )));
        }
        if cap > u32::MAX as u64 || f > u32::MAX as u64 {
            return Err(LoaderError::InvalidConfig("buffer sizes must fit in 32 bits".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochPlan {
    pub epoch_index: u64,
    pub blocks: Vec<RowRange>,
}

/// Permutes the runs of `fetch_block_rows` rows covering `0..n_obs`.
pub fn plan_epoch(n_obs: u64, config: &LoaderConfig, epoch_index: u64) -> EpochPlan {
    let f = config.fetch_block_rows.max(1);
    let mut blocks: Vec<RowRange> = (0..n_obs.div_ceil(f))
        .map(|k| RowRange::new(k * f, (k * f + f).min(n_obs)))
        .collect();
    blocks.shuffle(&mut rng::stream(config.seed, Purpose::EpochBlocks, epoch_index));
    EpochPlan { epoch_index, blocks }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiniBatch {
    pub block: RowBlock,
    pub global_indices: Vec<u64>,
    pub epoch_index: u64,
    pub batch_index: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoaderCounters {
    pub read_ops: u64,
    pub bytes_read: u64,
    /// Plan blocks handed to the shuffle buffer so far.
    pub blocks_fetched: u64,
    pub chunk_decodes: u64,
    pub rows_emitted: u64,
    pub batches_emitted: u64,
    pub peak_buffer_rows: u64,
    pub cache_bypass_requested: bool,
    pub direct_read_ops: u64,
}

type Fetched = Result<(RowBlock, IoStats), StoreError>;

enum Fetcher {
    Inline {
        source: Arc<dyn RowSource>,
        cache_bypass: bool,
    },
    Background {
        rx: Option<Receiver<Fetched>>,
        handle: Option<JoinHandle<()>>,
    },
}

impl Fetcher {
    fn start(source: Arc<dyn RowSource>, blocks: &[RowRange], config: &LoaderConfig) -> Self {
        let cache_bypass = config.cache_bypass;
        if config.prefetch_depth == 0 {
            return Fetcher::Inline { source, cache_bypass };
        }
        // one block in the fetcher's hands plus depth-1 queued
        let (tx, rx) = sync_channel(config.prefetch_depth - 1);
        let blocks = blocks.to_vec();
        let handle = std::thread::spawn(move || {
            for range in blocks {
                let r = source.read_range(range, cache_bypass);
                let failed = r.is_err();
                if tx.send(r).is_err() || failed {
                    break;
                }
            }
        });
        Fetcher::Background {
            rx: Some(rx),
            handle: Some(handle),
        }
    }

    fn next(&mut self, range: RowRange) -> Fetched {
        match self {
            Fetcher::Inline { source, cache_bypass } => source.read_range(range, *cache_bypass),
            Fetcher::Background { rx, .. } => rx
                .as_ref()
                .and_then(|rx| rx.recv().ok())
                .expect("prefetch thread ended early"),
        }
    }
}

impl Drop for Fetcher {
    fn drop(&mut self) {
        if let Fetcher::Background { rx, handle } = self {
            // dropping the receiver unblocks a pending send
            drop(rx.take());
            if let Some(h) = handle.take() {
                let _ = h.join();
            }
        }
    }
}

/// One epoch of minibatches.
///
/// A fetch error is returned once, from the batch request that needed the
/// block; the iterator is finished afterwards. Requests past the end keep
/// returning `None`.
pub struct BatchIterator {
    config: LoaderConfig,
    plan: EpochPlan,
    source: Arc<dyn RowSource>,
    fetcher: Fetcher,
    buffer: ShuffleBuffer,
    draws: Rng,
    next_block: usize,
    filled: bool,
    unemitted: u64,
    counters: LoaderCounters,
    done: bool,
}

impl std::fmt::Debug for BatchIterator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BatchIterator")
            .field("config", &self.config)
            .field("epoch_index", &self.plan.epoch_index)
            .field("counters", &self.counters)
            .finish()
    }
}

pub fn open_epoch(
    source: Arc<dyn RowSource>,
    config: &LoaderConfig,
    epoch_index: u64,
) -> Result<BatchIterator, LoaderError> {
    config.validate()?;
    let plan = plan_epoch(source.n_obs(), config, epoch_index);
    let fetcher = Fetcher::start(source.clone(), &plan.blocks, config);
    Ok(BatchIterator {
        buffer: ShuffleBuffer::new(
            config.buffer_capacity_rows as usize,
            config.fetch_block_rows as usize,
        ),
        draws: rng::stream(config.seed, Purpose::BufferDraws, epoch_index),
        next_block: 0,
        filled: false,
        unemitted: source.n_obs(),
        counters: LoaderCounters {
            cache_bypass_requested: config.cache_bypass,
            ..Default::default()
        },
        done: false,
        config: *config,
        plan,
        source,
        fetcher,
    })
}

impl BatchIterator {
    pub fn plan(&self) -> &EpochPlan {
        &self.plan
    }

    pub fn config(&self) -> &LoaderConfig {
        &self.config
    }

    pub fn io_counters(&self) -> LoaderCounters {
        self.counters
    }

    fn fetch_one(&mut self) -> Result<(), LoaderError> {
        let k = self.next_block;
        let range = self.plan.blocks[k];
        let (rows, stats) = self.fetcher.next(range).map_err(|source| LoaderError::Fetch {
            block: k,
            range,
            source,
        })?;
        if rows.n_rows() as u64 != range.len() {
            return Err(LoaderError::Fetch {
                block: k,
                range,
                source: StoreError::Mismatch(format!("got {} rows", rows.n_rows())),
            });
        }
        self.next_block += 1;
        let c = &mut self.counters;
        c.blocks_fetched += 1;
        c.read_ops += stats.read_ops;
        c.bytes_read += stats.bytes_read;
        c.chunk_decodes += stats.chunk_decodes;
        c.direct_read_ops += stats.direct_read_ops;
        self.buffer.push(rows, range.start);
        c.peak_buffer_rows = c.peak_buffer_rows.max(self.buffer.occupancy() as u64);
        Ok(())
    }

    fn blocks_left(&self) -> bool {
        self.next_block < self.plan.blocks.len()
    }

    fn top_up(&mut self) -> Result<(), LoaderError> {
        let cap = self.config.buffer_capacity_rows as usize;
        if !self.filled {
            while self.buffer.occupancy() < cap && self.blocks_left() {
                self.fetch_one()?;
            }
            self.filled = true;
        }
        let low = cap - self.config.fetch_block_rows as usize;
        while self.buffer.occupancy() <= low && self.blocks_left() {
            self.fetch_one()?;
        }
        Ok(())
    }

    /// Next batch, or `None` at end of epoch.
    pub fn next_batch(&mut self) -> Result<Option<MiniBatch>, LoaderError> {
        if self.done {
            return Ok(None);
        }
        let size = self.config.batch_rows.min(self.unemitted);
        if size == 0 || (size < self.config.batch_rows && self.config.drop_last) {
            self.done = true;
            return Ok(None);
        }
        let mut block = RowBlock::empty(
            self.source.layout(),
            self.source.value_dtype(),
            self.source.n_var(),
        );
        let mut ids = Vec::with_capacity(size as usize);
        for _ in 0..size {
            if let Err(e) = self.top_up() {
                self.done = true;
                return Err(e);
            }
            let i = self.draws.random_range(0..self.buffer.occupancy());
            ids.push(self.buffer.take(i, &mut block));
        }
        self.unemitted -= size;
        let batch = MiniBatch {
            block,
            global_indices: ids,
            epoch_index: self.plan.epoch_index,
            batch_index: self.counters.batches_emitted,
        };
        self.counters.rows_emitted += size;
        self.counters.batches_emitted += 1;
        Ok(Some(batch))
    }
}

impl Iterator for BatchIterator {
    type Item = Result<MiniBatch, LoaderError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_batch().transpose()
    }
}
