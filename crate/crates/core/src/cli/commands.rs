use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::args::{BenchStrategy, CacheModeFlag, ChunkFlags, Command, InputFormat, LoaderFlags, StoreFlags};
use super::ingest::{ingest_csv, ingest_triplet};
use super::synth::{synth_store, SynthSpec};
use super::{Cli, CliError};
use crate::loader::{open_epoch, LoaderConfig, RowSource};
use crate::metrics::{randomness_report, run_throughput, sweep, RandomnessOptions, RandomnessReport, Strategy, ThroughputReport};
use crate::preshuffle::{
    collection_from_manifest, read_provenance, run_shuffle_passes, DatasetCollection,
    OutputOptions, VerifyOptions, verify_shuffle,
};
use crate::store::{Layout, RowBlock, Store, StoreOptions};

pub(super) fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let log = |err: &mut dyn Write, level: u8, msg: &str| {
        if cli.verbose >= level {
            let _ = writeln!(err, "{msg}");
        }
    };
    match &cli.command {
        Command::Ingest { input, format, store } => {
            let path = require_output(cli)?;
            let opts = store_options(store, Layout::Dense);
            let s = match format {
                InputFormat::Csv => ingest_csv(input, path, &opts)?,
                InputFormat::Triplet => ingest_triplet(input, path, &opts)?,
            };
            log(err, 1, &format!("wrote {} rows x {} columns to {}", s.n_obs(), s.n_var(), path.display()));
            writeln!(out, "{}", s.manifest().to_json().trim_end())?;
        }
        Command::Synth { n_obs, n_var, layout, density, disk_budget, store } => {
            let path = require_output(cli)?;
            let spec = SynthSpec {
                n_obs: *n_obs,
                n_var: *n_var,
                layout: *layout,
                density: *density,
                seed: cli.seed,
                disk_budget_bytes: *disk_budget,
            };
            let s = synth_store(path, &spec, &store_options(store, *layout))?;
            log(err, 1, &format!("wrote {} rows to {}", s.n_obs(), path.display()));
            writeln!(out, "{}", s.manifest().to_json().trim_end())?;
        }
        Command::Shuffle { inputs, join, block_rows, buffer_rows, passes, keep_intermediates, chunking } => {
            let path = require_output(cli)?;
            let mut coll = DatasetCollection::new(*join);
            for p in inputs {
                coll.add_dataset(Arc::new(Store::open(p)?))?;
            }
            for w in coll.warnings() {
                let _ = writeln!(err, "{}", serde_json::json!({ "warning": w }));
            }
            let output = OutputOptions {
                chunk_rows: chunking.chunk_rows,
                chunks_per_shard: chunking.chunks_per_shard,
                codec: chunking.codec,
                index_dtype: chunking.index_dtype,
            };
            let result = run_shuffle_passes(
                &coll, *block_rows, *buffer_rows, cli.seed, *passes, path, &output, *keep_intermediates,
            )?;
            let s = result.stats;
            writeln!(
                out,
                "{}",
                serde_json::json!({
                    "rows_written": s.rows_written,
                    "rounds": s.rounds,
                    "passes": passes,
                    "peak_resident_rows": s.peak_resident_rows,
                    "read_ops": s.io.read_ops,
                    "bytes_read": s.io.bytes_read,
                    "chunk_decodes": s.io.chunk_decodes,
                })
            )?;
        }
        Command::Iterate { store, loader, epochs, first_epoch, check_identity, cache_bypass } => {
            let opened = Store::open(store)?;
            // a shuffled store's identity channel holds the source row
            let expected: Option<Vec<u64>> = match (*check_identity, opened.manifest().has_provenance) {
                (false, _) => None,
                (true, false) => Some((0..opened.n_obs()).collect()),
                (true, true) => Some(read_provenance(store)?.1.records.iter().map(|r| r.source_row).collect()),
            };
            let s: Arc<dyn RowSource> = Arc::new(opened);
            let mut cfg = loader_config(loader, cli.seed);
            cfg.cache_bypass = *cache_bypass;
            let mut sink = report_sink(cli, out)?;
            let mut failures = Vec::new();
            for e in *first_epoch..*first_epoch + *epochs {
                let summary = iterate_epoch(&s, &cfg, e, expected.as_deref())?;
                log(err, 1, &format!("epoch {e}: {} rows", summary.rows));
                if !summary.complete {
                    failures.push(format!("epoch {e} emitted {} distinct of {} rows", summary.distinct_rows, s.n_obs()));
                }
                if summary.identity_mismatches > 0 {
                    failures.push(format!("epoch {e}: {} rows fail the identity check", summary.identity_mismatches));
                }
                writeln!(sink, "{}", serde_json::to_string(&summary).unwrap())?;
            }
            if !failures.is_empty() {
                return Err(CliError::Verify(failures.join("; ")));
            }
        }
        Command::Bench { store, loader, strategy, epochs, warmup, cache_mode, sweep: param, values } => {
            let s: Arc<dyn RowSource> = Arc::new(Store::open(store)?);
            let mut cfg = loader_config(loader, cli.seed);
            cfg.cache_bypass = *cache_mode == CacheModeFlag::ColdBestEffort;
            let mut sink = report_sink(cli, out)?;
            if let (Some(param), Some(values)) = (param, values) {
                let strategies = strategy.strategies();
                for (k, st) in strategies.iter().enumerate() {
                    let table = sweep(s.clone(), *param, values, &cfg, *epochs, *warmup, *st)?;
                    for skip in &table.skipped {
                        let _ = writeln!(err, "{}", serde_json::json!({ "skipped": skip }));
                    }
                    let csv = table.to_csv();
                    // one header for the whole output
                    let body = if k == 0 { csv.as_str() } else { csv.split_once('\n').map_or("", |x| x.1) };
                    write!(sink, "{body}")?;
                }
            } else {
                let mut reports = Vec::new();
                for st in strategy.strategies() {
                    log(err, 1, &format!("running {st}"));
                    reports.push(run_throughput(s.clone(), &cfg, *epochs, *warmup, st)?);
                }
                write!(sink, "{}", throughput_csv(&reports))?;
                if *strategy == BenchStrategy::Both {
                    let _ = writeln!(err, "{}", comparison(&reports[0], &reports[1]));
                }
            }
        }
        Command::Verify { store, sample_rows, all, max_listed } => {
            let s = Store::open(store)?;
            let (manifest, prov) = read_provenance(store)?;
            let coll = collection_from_manifest(&manifest)?;
            let opts = VerifyOptions {
                sample_rows: if *all { None } else { Some(*sample_rows) },
                seed: cli.seed,
                max_listed: *max_listed,
            };
            let report = verify_shuffle(&s, &prov, &coll, &opts)?;
            let mut sink = report_sink(cli, out)?;
            writeln!(sink, "{}", serde_json::to_string(&report).unwrap())?;
            if !report.ok() {
                let first = report.violations.first().map(|v| v.to_string()).unwrap_or_default();
                return Err(CliError::Verify(format!("{} violations; first: {first}", report.violation_count)));
            }
        }
        Command::Inspect { store } => {
            let s = Store::open(store)?;
            let m = s.manifest();
            write!(out, "{}", m.to_json())?;
            writeln!(
                out,
                "layout={} n_obs={} n_var={} chunk_rows={} chunks_per_shard={} shard_capacity_rows={} chunk_count={} shard_count={} codec={} has_provenance={}",
                m.layout,
                m.n_obs,
                m.n_var,
                m.chunk_rows,
                m.chunks_per_shard,
                m.shard_capacity_rows(),
                m.chunk_count(),
                m.shard_count(),
                serde_json::to_value(m.codec).unwrap().as_str().unwrap_or("?"),
                m.has_provenance
            )?;
        }
        Command::SuggestChunking { layout, target_elements, mean_nnz, n_var } => {
            let per_row = match layout {
                Layout::Csr => mean_nnz.ok_or_else(|| CliError::Usage("--mean-nnz is required for csr".into()))?,
                Layout::Dense => n_var.ok_or_else(|| CliError::Usage("--n-var is required for dense".into()))? as f64,
            };
            let s = suggest_chunking(*layout, *target_elements, per_row)?;
            writeln!(out, "{}", serde_json::to_string(&s).unwrap())?;
        }
        Command::Randomness { store, block_rows, window_rows, batch_rows, null_trials } => {
            let (manifest, prov) = read_provenance(store)?;
            let mut offsets = Vec::with_capacity(manifest.input_rows.len());
            let mut acc = 0;
            for &r in &manifest.input_rows {
                offsets.push(acc);
                acc += r;
            }
            if prov.records.iter().any(|r| r.dataset_id as usize >= offsets.len()) {
                return Err(CliError::Io("provenance names an unknown dataset".into()));
            }
            let stream = prov.global_indices(&offsets);
            let opts = RandomnessOptions { batch_rows: *batch_rows, null_trials: *null_trials, seed: cli.seed };
            let report = randomness_report(&stream, *block_rows, *window_rows, &opts).map_err(CliError::Usage)?;
            let mut sink = report_sink(cli, out)?;
            write!(sink, "{}", randomness_csv(&report))?;
        }
    }
    Ok(())
}

fn require_output(cli: &Cli) -> Result<&Path, CliError> {
    cli.output
        .as_deref()
        .ok_or_else(|| CliError::Usage("--output is required for this command".into()))
}

fn report_sink<'a>(cli: &Cli, out: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match &cli.output {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(out),
    })
}

fn store_options(flags: &StoreFlags, layout: Layout) -> StoreOptions {
    let c: &ChunkFlags = &flags.chunking;
    let mut o = StoreOptions::new(layout, flags.dtype, Vec::new())
        .chunking(c.chunk_rows, c.chunks_per_shard)
        .codec(c.codec);
    o.index_dtype = c.index_dtype;
    o
}

fn loader_config(flags: &LoaderFlags, seed: u64) -> LoaderConfig {
    LoaderConfig {
        fetch_block_rows: flags.fetch_block_rows,
        buffer_capacity_rows: flags.buffer_rows,
        batch_rows: flags.batch_rows,
        seed,
        prefetch_depth: flags.prefetch_depth,
        drop_last: flags.drop_last,
        cache_bypass: false,
    }
}

#[derive(Debug, Serialize)]
struct EpochSummary {
    epoch: u64,
    rows: u64,
    batches: u64,
    distinct_rows: u64,
    complete: bool,
    identity_checked: bool,
    identity_mismatches: u64,
    /// SHA-256 over the emitted global indices, in order.
    index_checksum: String,
    /// SHA-256 over the emitted batch payloads, in order.
    value_checksum: String,
    read_ops: u64,
    bytes_read: u64,
    blocks_fetched: u64,
    peak_buffer_rows: u64,
    seconds: f64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_block(h: &mut Sha256, block: &RowBlock) {
    let mut buf = Vec::new();
    match block {
        RowBlock::Dense(d) => d.values.write_le(&mut buf),
        RowBlock::Csr(c) => {
            for p in &c.indptr {
                buf.extend_from_slice(&p.to_le_bytes());
            }
            for i in &c.indices {
                buf.extend_from_slice(&i.to_le_bytes());
            }
            c.data.write_le(&mut buf);
        }
    }
    h.update(&buf);
}

fn iterate_epoch(
    source: &Arc<dyn RowSource>,
    cfg: &LoaderConfig,
    epoch: u64,
    identity: Option<&[u64]>,
) -> Result<EpochSummary, CliError> {
    let n = source.n_obs() as usize;
    let mut seen = vec![false; n];
    let mut distinct = 0u64;
    let mut mismatches = 0u64;
    let mut ih = Sha256::new();
    let mut vh = Sha256::new();
    let t = std::time::Instant::now();
    let mut it = open_epoch(source.clone(), cfg, epoch)?;
    while let Some(batch) = it.next_batch()? {
        for (j, &g) in batch.global_indices.iter().enumerate() {
            ih.update(g.to_le_bytes());
            if !std::mem::replace(&mut seen[g as usize], true) {
                distinct += 1;
            }
            if identity.is_some_and(|want| batch.block.get(j, 0) != want[g as usize] as f64) {
                mismatches += 1;
            }
        }
        hash_block(&mut vh, &batch.block);
    }
    let c = it.io_counters();
    let expected = if cfg.drop_last { n as u64 / cfg.batch_rows * cfg.batch_rows } else { n as u64 };
    Ok(EpochSummary {
        epoch,
        rows: c.rows_emitted,
        batches: c.batches_emitted,
        distinct_rows: distinct,
        complete: distinct == expected && c.rows_emitted == expected,
        identity_checked: identity.is_some(),
        identity_mismatches: mismatches,
        index_checksum: hex(&ih.finalize()),
        value_checksum: hex(&vh.finalize()),
        read_ops: c.read_ops,
        bytes_read: c.bytes_read,
        blocks_fetched: c.blocks_fetched,
        peak_buffer_rows: c.peak_buffer_rows,
        seconds: t.elapsed().as_secs_f64(),
    })
}

fn throughput_csv(reports: &[ThroughputReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ThroughputReport::CSV_HEADER).unwrap();
    for r in reports {
        w.write_record(r.csv_fields()).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn randomness_csv(r: &RandomnessReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RandomnessReport::CSV_HEADER).unwrap();
    w.write_record(r.csv_fields()).unwrap();
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn comparison(chunked: &ThroughputReport, random: &ThroughputReport) -> serde_json::Value {
    debug_assert_eq!(chunked.strategy, Strategy::Chunked);
    serde_json::json!({
        "chunked_over_row_random": {
            "samples_per_sec": chunked.samples_per_sec / random.samples_per_sec,
            "read_ops_reduction": random.read_ops as f64 / chunked.read_ops.max(1) as f64,
            "cache_mode": chunked.cache_mode,
            "cache_bypass_honored": chunked.cache_bypass_honored && random.cache_bypass_honored,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChunkingSuggestion {
    pub chunk_rows: u64,
    pub chunks_per_shard: u64,
}

/// Rows per chunk so a chunk holds about `target_elements` stored values,
/// given the mean nonzeros per row (csr) or the column count (dense).
pub fn suggest_chunking(
    layout: Layout,
    target_elements: u64,
    elements_per_row: f64,
) -> Result<ChunkingSuggestion, CliError> {
    if target_elements == 0 {
        return Err(CliError::Usage("target elements must be >= 1".into()));
    }
    if !(elements_per_row > 0.0 && elements_per_row.is_finite()) {
        let what = match layout {
            Layout::Csr => "mean nonzeros per row",
            Layout::Dense => "n_var",
        };
        return Err(CliError::Usage(format!("{what} must be positive")));
    }
    let rows = (target_elements as f64 / elements_per_row).round().max(1.0) as u64;
    Ok(ChunkingSuggestion {
        chunk_rows: rows,
        chunks_per_shard: 128,
    })
}
