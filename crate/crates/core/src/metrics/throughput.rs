use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::loader::{open_epoch, LoaderConfig, LoaderError, RowSource};
use crate::rng::{self, Purpose};
use crate::store::{IoStats, RowBlock, RowRange};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Shuffle-buffer loader over contiguous fetch blocks.
    Chunked,
    /// One read call per row, rows visited in a seeded random order.
    RowRandom,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chunked" => Ok(Strategy::Chunked),
            "row_random" => Ok(Strategy::RowRandom),
            _ => Err(format!("unknown strategy `{s}` (chunked|row_random)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Chunked => "chunked",
            Strategy::RowRandom => "row_random",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    Warm,
    /// Reads request cache bypass; whether the OS honored it is reported.
    ColdBestEffort,
}

impl std::fmt::Display for CacheMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CacheMode::Warm => "warm",
            CacheMode::ColdBestEffort => "cold_best_effort",
        })
    }
}

/// Measured epochs only; warmup epochs are run and discarded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub samples_per_sec: f64,
    pub batches_per_sec: f64,
    pub bytes_read: u64,
    pub read_ops: u64,
    pub wall_seconds: f64,
    pub epochs_measured: u64,
    pub warmup_epochs_discarded: u64,
    pub cache_mode: CacheMode,
    pub strategy: Strategy,
    pub rows_emitted: u64,
    pub batches_emitted: u64,
    pub n_obs: u64,
    pub chunk_decodes: u64,
    pub cache_bypass_honored: bool,
    pub fetch_block_rows: u64,
    pub buffer_capacity_rows: u64,
    pub batch_rows: u64,
    /// Samples/sec of every epoch run, warmup included.
    #[serde(skip)]
    pub epoch_samples_per_sec: Vec<f64>,
}

impl ThroughputReport {
    pub const CSV_HEADER: [&'static str; 17] = [
        "samples_per_sec",
        "batches_per_sec",
        "bytes_read",
        "read_ops",
        "wall_seconds",
        "epochs_measured",
        "warmup_epochs_discarded",
        "cache_mode",
        "strategy",
        "rows_emitted",
        "batches_emitted",
        "n_obs",
        "chunk_decodes",
        "cache_bypass_honored",
        "fetch_block_rows",
        "buffer_capacity_rows",
        "batch_rows",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            format!("{:.3}", self.samples_per_sec),
            format!("{:.3}", self.batches_per_sec),
            self.bytes_read.to_string(),
            self.read_ops.to_string(),
            format!("{:.6}", self.wall_seconds),
            self.epochs_measured.to_string(),
            self.warmup_epochs_discarded.to_string(),
            self.cache_mode.to_string(),
            self.strategy.to_string(),
            self.rows_emitted.to_string(),
            self.batches_emitted.to_string(),
            self.n_obs.to_string(),
            self.chunk_decodes.to_string(),
            self.cache_bypass_honored.to_string(),
            self.fetch_block_rows.to_string(),
            self.buffer_capacity_rows.to_string(),
            self.batch_rows.to_string(),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER).unwrap();
        w.write_record(self.csv_fields()).unwrap();
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Default)]
struct EpochTally {
    rows: u64,
    batches: u64,
    io: IoStats,
}

fn chunked_epoch(
    source: &Arc<dyn RowSource>,
    config: &LoaderConfig,
    epoch: u64,
) -> Result<EpochTally, LoaderError> {
    let mut it = open_epoch(source.clone(), config, epoch)?;
    while let Some(batch) = it.next_batch()? {
        black_box(&batch);
    }
    let c = it.io_counters();
    Ok(EpochTally {
        rows: c.rows_emitted,
        batches: c.batches_emitted,
        io: IoStats {
            read_ops: c.read_ops,
            bytes_read: c.bytes_read,
            chunk_decodes: c.chunk_decodes,
            cache_bypass_requested: c.cache_bypass_requested,
            direct_read_ops: c.direct_read_ops,
        },
    })
}

fn row_random_epoch(
    source: &Arc<dyn RowSource>,
    config: &LoaderConfig,
    epoch: u64,
) -> Result<EpochTally, LoaderError> {
    let n = source.n_obs();
    let mut order: Vec<u64> = (0..n).collect();
    order.shuffle(&mut rng::stream(config.seed, Purpose::RowRandom, epoch));
    let b = config.batch_rows.max(1) as usize;
    let mut tally = EpochTally::default();
    for (k, group) in order.chunks(b).enumerate() {
        if group.len() < b && config.drop_last {
            break;
        }
        let mut batch = RowBlock::empty(source.layout(), source.value_dtype(), source.n_var());
        for &row in group {
            let range = RowRange::new(row, row + 1);
            let (one, stats) = source
                .read_range(range, config.cache_bypass)
                .map_err(|e| LoaderError::Fetch { block: k, range, source: e })?;
            tally.io += stats;
            batch.append(&one);
        }
        black_box(&batch);
        tally.rows += group.len() as u64;
        tally.batches += 1;
    }
    Ok(tally)
}

/// Runs `warmup + epochs` epochs with `strategy` and reports the last `epochs`.
///
/// Epoch `k` uses epoch index `k`, so warmup and measured epochs see
/// different orders. `config.cache_bypass` selects the cold-best-effort mode.
pub fn run_throughput(
    source: Arc<dyn RowSource>,
    config: &LoaderConfig,
    epochs: u64,
    warmup: u64,
    strategy: Strategy,
) -> Result<ThroughputReport, LoaderError> {
    config.validate()?;
    if epochs == 0 {
        return Err(LoaderError::InvalidConfig("epochs must be >= 1".into()));
    }
    let mut measured = EpochTally::default();
    let mut wall = 0.0;
    let mut per_epoch = Vec::new();
    for e in 0..warmup + epochs {
        let t = Instant::now();
        let tally = match strategy {
            Strategy::Chunked => chunked_epoch(&source, config, e)?,
            Strategy::RowRandom => row_random_epoch(&source, config, e)?,
        };
        let secs = t.elapsed().as_secs_f64();
        per_epoch.push(tally.rows as f64 / secs.max(f64::MIN_POSITIVE));
        if e >= warmup {
            wall += secs;
            measured.rows += tally.rows;
            measured.batches += tally.batches;
            measured.io += tally.io;
        }
    }
    let wall_div = wall.max(f64::MIN_POSITIVE);
    Ok(ThroughputReport {
        samples_per_sec: measured.rows as f64 / wall_div,
        batches_per_sec: measured.batches as f64 / wall_div,
        bytes_read: measured.io.bytes_read,
        read_ops: measured.io.read_ops,
        wall_seconds: wall,
        epochs_measured: epochs,
        warmup_epochs_discarded: warmup,
        cache_mode: if config.cache_bypass { CacheMode::ColdBestEffort } else { CacheMode::Warm },
        strategy,
        rows_emitted: measured.rows,
        batches_emitted: measured.batches,
        n_obs: source.n_obs(),
        chunk_decodes: measured.io.chunk_decodes,
        cache_bypass_honored: measured.io.cache_bypass_honored(),
        fetch_block_rows: config.fetch_block_rows,
        buffer_capacity_rows: config.buffer_capacity_rows,
        batch_rows: config.batch_rows,
        epoch_samples_per_sec: per_epoch,
    })
}
