use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::provenance::{provenance_dir, read_provenance_manifest, ProvenanceWriter};
use super::{
    plan_shuffle, run_shuffle, DatasetCollection, OutputOptions, ProvenanceMap, ShuffleError,
    ShuffleOutput, ShuffleStats,
};
use crate::store::{Store, StoreError};

/// Intermediate store of pass `k` of a chained shuffle writing to `out`.
pub fn pass_path(out: &Path, k: usize) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(format!(".pass{k}"));
    PathBuf::from(s)
}

/// Seed of pass `k`: the base seed for the first pass, then consecutive values.
pub fn pass_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

/// Runs `passes` shuffle passes, each reading the previous pass's output.
///
/// Intermediates live next to `out` as `<out>.pass{k}` and are removed at
/// the end unless `keep_intermediates`. The final sidecar maps every output
/// row straight to the original inputs.
#[allow(clippy::too_many_arguments)]
pub fn run_shuffle_passes(
    collection: &DatasetCollection,
    block_rows: u64,
    buffer_rows: u64,
    seed: u64,
    passes: usize,
    out: &Path,
    output: &OutputOptions,
    keep_intermediates: bool,
) -> Result<ShuffleOutput, ShuffleError> {
    if passes == 0 {
        return Err(ShuffleError::InvalidPlan("passes must be >= 1".into()));
    }
    let n = collection.total_rows();
    let mut maps: Vec<ProvenanceMap> = Vec::with_capacity(passes);
    let mut stats = ShuffleStats::default();
    let mut last = None;
    for k in 0..passes {
        let plan = plan_shuffle(n, block_rows, buffer_rows, pass_seed(seed, k))?;
        let target = if k + 1 == passes { out.to_path_buf() } else { pass_path(out, k) };
        let result = if k == 0 {
            run_shuffle(collection, &plan, &target, output)?
        } else {
            let prev = Store::open(&pass_path(out, k - 1))?;
            let single = DatasetCollection::from_stores(collection.join_mode(), [Arc::new(prev)])?;
            run_shuffle(&single, &plan, &target, output)?
        };
        stats.rounds += result.stats.rounds;
        stats.rows_written = result.stats.rows_written;
        stats.peak_resident_rows = stats.peak_resident_rows.max(result.stats.peak_resident_rows);
        stats.io += result.stats.io;
        maps.push(result.provenance);
        last = Some(result.store);
    }
    let store = last.unwrap();
    if passes == 1 {
        return Ok(ShuffleOutput {
            store,
            provenance: maps.pop().unwrap(),
            stats,
        });
    }

    // output row -> row of pass k-1 -> ... -> original (dataset, row)
    let mut composed = maps.pop().unwrap();
    while let Some(prev) = maps.pop() {
        for rec in composed.records.iter_mut() {
            *rec = prev.records[rec.source_row as usize];
        }
    }
    let mut manifest = read_provenance_manifest(out)?;
    let first = read_provenance_manifest(&pass_path(out, 0))?;
    manifest.inputs = first.inputs;
    manifest.input_rows = first.input_rows;
    manifest.join_mode = first.join_mode;
    manifest.seed = seed;
    let dir = provenance_dir(out);
    std::fs::remove_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
    let mut w = ProvenanceWriter::create(out, manifest.chunk_rows, manifest.chunks_per_shard, manifest.codec)?;
    for &rec in &composed.records {
        w.push(rec)?;
    }
    w.finish(manifest)?;

    if !keep_intermediates {
        for k in 0..passes - 1 {
            let p = pass_path(out, k);
            std::fs::remove_dir_all(&p).map_err(|e| StoreError::io(&p, e))?;
        }
    }
    Ok(ShuffleOutput {
        store,
        provenance: composed,
        stats,
    })
}
