use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use crate::metrics::{Strategy, SweepParameter};
use crate::preshuffle::JoinMode;
use crate::store::{Codec, IndexDtype, Layout, ValueDtype};

/// Parses a non-negative integer written plainly (`4096`, `1_000`) or as a
/// power (`2^12`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    let t: String = s.trim().chars().filter(|&c| c != '_').collect();
    let bad = || format!("`{s}` is not a count (use digits or base^exp, e.g. 2^20)");
    match t.split_once('^') {
        Some((base, exp)) => {
            let base: u64 = base.parse().map_err(|_| bad())?;
            let exp: u32 = exp.parse().map_err(|_| bad())?;
            base.checked_pow(exp).ok_or_else(|| format!("`{s}` overflows 64 bits"))
        }
        None => t.parse().map_err(|_| bad()),
    }
}

pub fn parse_usize(s: &str) -> Result<usize, String> {
    let v = parse_count(s)?;
    usize::try_from(v).map_err(|_| format!("`{s}` is too large"))
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ChunkFlags {
    /// Rows per chunk.
    #[arg(long, default_value = "256", value_parser = parse_count)]
    pub chunk_rows: u64,
    /// Chunks per shard file.
    #[arg(long, default_value = "128", value_parser = parse_count)]
    pub chunks_per_shard: u64,
    /// none | deflate
    #[arg(long, default_value = "none")]
    pub codec: Codec,
    /// CSR index width on disk: u32 | u64 (default: smallest that fits).
    #[arg(long)]
    pub index_dtype: Option<IndexDtype>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct StoreFlags {
    /// f32 | f64 | i32 | u8
    #[arg(long, default_value = "f32")]
    pub dtype: ValueDtype,
    #[command(flatten)]
    pub chunking: ChunkFlags,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct LoaderFlags {
    /// Rows per contiguous fetch (f).
    #[arg(long, default_value = "256", value_parser = parse_count)]
    pub fetch_block_rows: u64,
    /// Shuffle-buffer capacity in rows (B >= f).
    #[arg(long, default_value = "4096", value_parser = parse_count)]
    pub buffer_rows: u64,
    /// Rows per minibatch (b <= B).
    #[arg(long, default_value = "256", value_parser = parse_count)]
    pub batch_rows: u64,
    /// Blocks fetched ahead on a background thread; 0 fetches inline.
    #[arg(long, default_value = "2", value_parser = parse_usize)]
    pub prefetch_depth: usize,
    /// Drop a final batch smaller than --batch-rows.
    #[arg(long)]
    pub drop_last: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// Header of column names, then one numeric row per line.
    Csv,
    /// `n_obs n_var`, then 0-based `row col value` lines.
    Triplet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchStrategy {
    Chunked,
    RowRandom,
    Both,
}

impl BenchStrategy {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            BenchStrategy::Chunked => vec![Strategy::Chunked],
            BenchStrategy::RowRandom => vec![Strategy::RowRandom],
            BenchStrategy::Both => vec![Strategy::Chunked, Strategy::RowRandom],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheModeFlag {
    Warm,
    ColdBestEffort,
}

#[derive(Clone, Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Convert a CSV (dense) or triplet (CSR) text file into a store at --output.
    Ingest {
        input: PathBuf,
        #[arg(long, value_enum)]
        format: InputFormat,
        #[command(flatten)]
        store: StoreFlags,
    },
    /// Write a seeded synthetic store at --output; column 0 holds the row index.
    Synth {
        #[arg(long, value_parser = parse_count)]
        n_obs: u64,
        #[arg(long, value_parser = parse_count)]
        n_var: u64,
        /// dense | csr
        #[arg(long, default_value = "dense")]
        layout: Layout,
        /// Nonzero fraction per row for csr, identity column included.
        #[arg(long, default_value = "0.01")]
        density: f64,
        /// Refuse to write more than this many bytes (estimated).
        #[arg(long, default_value = "2^36", value_parser = parse_count)]
        disk_budget: u64,
        #[command(flatten)]
        store: StoreFlags,
    },
    /// Pre-shuffle one or more stores into a single store at --output.
    Shuffle {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// outer (union of columns) | inner (intersection)
        #[arg(long, default_value = "outer")]
        join: JoinMode,
        /// Contiguous rows read per block (c).
        #[arg(long, default_value = "256", value_parser = parse_count)]
        block_rows: u64,
        /// Rows shuffled in memory per round (m >= c).
        #[arg(long, default_value = "2^20", value_parser = parse_count)]
        buffer_rows: u64,
        /// Shuffle passes; pass k uses seed + k.
        #[arg(long, default_value = "1", value_parser = parse_usize)]
        passes: usize,
        /// Keep the <output>.pass{k} stores of a multi-pass run.
        #[arg(long)]
        keep_intermediates: bool,
        #[command(flatten)]
        chunking: ChunkFlags,
    },
    /// Stream epochs of minibatches; prints one JSON line per epoch with row
    /// counts and checksums.
    Iterate {
        store: PathBuf,
        #[command(flatten)]
        loader: LoaderFlags,
        #[arg(long, default_value = "1", value_parser = parse_count)]
        epochs: u64,
        /// Epoch index of the first epoch.
        #[arg(long, default_value = "0", value_parser = parse_count)]
        first_epoch: u64,
        /// Check that column 0 equals each row's global index (its source row on
        /// shuffled stores).
        #[arg(long)]
        check_identity: bool,
        /// Request page-cache bypass (best effort).
        #[arg(long)]
        cache_bypass: bool,
    },
    /// Measure loader throughput; writes a CSV table.
    Bench {
        store: PathBuf,
        #[command(flatten)]
        loader: LoaderFlags,
        #[arg(long, value_enum, default_value = "both")]
        strategy: BenchStrategy,
        #[arg(long, default_value = "1", value_parser = parse_count)]
        epochs: u64,
        #[arg(long, default_value = "0", value_parser = parse_count)]
        warmup: u64,
        /// warm, or cold_best_effort (requests page-cache bypass).
        #[arg(long, value_enum, default_value = "warm")]
        cache_mode: CacheModeFlag,
        /// Sweep one loader size: batch_rows | fetch_block_rows | buffer_capacity_rows.
        #[arg(long, requires = "values")]
        sweep: Option<SweepParameter>,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', value_parser = parse_count)]
        values: Option<Vec<u64>>,
    },
    /// Check a shuffled store against its provenance sidecar and inputs.
    Verify {
        store: PathBuf,
        /// Rows whose values are compared.
        #[arg(long, default_value = "10000", value_parser = parse_count)]
        sample_rows: u64,
        /// Compare every row.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value = "100", value_parser = parse_usize)]
        max_listed: usize,
    },
    /// Print a store's manifest and derived layout figures.
    Inspect { store: PathBuf },
    /// Suggest chunk_rows for a target number of elements per chunk.
    SuggestChunking {
        #[arg(long)]
        layout: Layout,
        #[arg(long, value_parser = parse_count)]
        target_elements: u64,
        /// Mean nonzeros per row (csr).
        #[arg(long)]
        mean_nnz: Option<f64>,
        /// Columns (dense).
        #[arg(long, value_parser = parse_count)]
        n_var: Option<u64>,
    },
    /// Randomness report of a shuffled store's row order, from its sidecar.
    Randomness {
        store: PathBuf,
        /// Source block size whose collisions are counted.
        #[arg(long, value_parser = parse_count)]
        block_rows: u64,
        #[arg(long, default_value = "256", value_parser = parse_usize)]
        window_rows: usize,
        #[arg(long, default_value = "256", value_parser = parse_usize)]
        batch_rows: usize,
        #[arg(long, default_value = "200", value_parser = parse_usize)]
        null_trials: usize,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("2^21"), Ok(1 << 21));
        assert_eq!(parse_count(" 1_024 "), Ok(1024));
        assert_eq!(parse_count("10^3"), Ok(1000));
        assert!(parse_count("2^64").is_err());
        assert!(parse_count("-1").is_err());
        assert!(parse_count("1e6").is_err());
    }
}
