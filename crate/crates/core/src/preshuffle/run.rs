use std::path::Path;

use super::provenance::{ProvenanceManifest, ProvenanceMap, ProvenanceRecord, ProvenanceWriter, RECORD_KIND};
use super::{DatasetCollection, ShuffleError, ShufflePlan};
use crate::rng::PRNG_NAME;
use crate::store::{
    Codec, IndexDtype, IoStats, Layout, RowBlock, RowRange, Store, StoreOptions, StoreWriter,
    FORMAT_VERSION,
};

/// Chunking of the shuffled output; not inherited from the inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputOptions {
    pub chunk_rows: u64,
    pub chunks_per_shard: u64,
    pub codec: Codec,
    /// CSR outputs only.
    pub index_dtype: Option<IndexDtype>,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            chunk_rows: 256,
            chunks_per_shard: 128,
            codec: Codec::None,
            index_dtype: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ShuffleStats {
    /// Rounds over all passes.
    pub rounds: usize,
    pub rows_written: u64,
    /// Largest number of rows held by the shuffler at once: the current
    /// round's rows plus the group being staged for the writer.
    pub peak_resident_rows: u64,
    pub io: IoStats,
}

#[derive(Debug)]
pub struct ShuffleOutput {
    pub store: Store,
    pub provenance: ProvenanceMap,
    pub stats: ShuffleStats,
}

#[derive(Default)]
struct ResidentRows {
    now: u64,
    peak: u64,
}

impl ResidentRows {
    fn add(&mut self, n: usize) {
        self.now += n as u64;
        self.peak = self.peak.max(self.now);
    }

    fn sub(&mut self, n: usize) {
        self.now -= n as u64;
    }
}

/// Writes the rows of `collection` to a new store at `out_path` in the order
/// given by `plan`, one round at a time.
///
/// For each round the round's blocks are read (one coalesced read per member
/// store, so each input chunk is decoded at most once per round), projected
/// onto the unified columns, permuted uniformly, and appended together with
/// their provenance records. The output manifest is written last; an
/// interrupted run leaves no manifest behind.
pub fn run_shuffle(
    collection: &DatasetCollection,
    plan: &ShufflePlan,
    out_path: &Path,
    output: &OutputOptions,
) -> Result<ShuffleOutput, ShuffleError> {
    let (Some(layout), Some(dtype)) = (collection.layout(), collection.value_dtype()) else {
        return Err(ShuffleError::InvalidPlan("collection is empty".into()));
    };
    if plan.total_rows != collection.total_rows() {
        return Err(ShuffleError::InvalidPlan(format!(
            "plan covers {} rows but the collection has {}",
            plan.total_rows,
            collection.total_rows()
        )));
    }
    let mut store_opts = StoreOptions::new(layout, dtype, collection.unified_var_names().to_vec())
        .chunking(output.chunk_rows, output.chunks_per_shard)
        .codec(output.codec);
    if layout == Layout::Csr {
        store_opts.index_dtype = output.index_dtype;
    }
    let mut writer = StoreWriter::create(out_path, &store_opts, false)?;
    let mut prov = ProvenanceWriter::create(
        out_path,
        output.chunk_rows,
        output.chunks_per_shard,
        output.codec,
    )?;

    let members = collection.members();
    let mut resident = ResidentRows::default();
    let mut io = IoStats::default();
    let mut records = Vec::with_capacity(plan.total_rows as usize);
    let stage_rows = plan.block_rows.max(1) as usize;

    for (r, round) in plan.rounds.iter().enumerate() {
        // per-member local ranges, in round order
        let mut ranges: Vec<Vec<RowRange>> = vec![Vec::new(); members.len()];
        // (global start, member, offset in that member's result), sorted by start
        let mut pieces: Vec<(u64, usize, usize)> = Vec::new();
        let mut taken = vec![0usize; members.len()];
        for &b in round {
            let mut global = plan.block_range(b).start;
            for (idx, local) in collection.split_range(plan.block_range(b)) {
                ranges[idx].push(local);
                pieces.push((global, idx, taken[idx]));
                taken[idx] += local.len() as usize;
                global += local.len();
            }
        }
        pieces.sort_unstable_by_key(|p| p.0);

        let mut results: Vec<Option<RowBlock>> = Vec::with_capacity(members.len());
        for (idx, rs) in ranges.iter().enumerate() {
            if rs.is_empty() {
                results.push(None);
                continue;
            }
            let (block, stats) = members[idx].store.read_rows(rs, false)?;
            io += stats;
            resident.add(block.n_rows());
            results.push(Some(collection.reproject(idx, block)));
        }

        let order = plan.round_order(r);
        for group in order.chunks(stage_rows) {
            let mut staged = collection.empty_block();
            let mut recs = Vec::with_capacity(group.len());
            for &g in group {
                let p = pieces[pieces.partition_point(|p| p.0 <= g) - 1];
                let row = p.2 + (g - p.0) as usize;
                staged.extend_rows(results[p.1].as_ref().unwrap(), row..row + 1);
                let member = &members[p.1];
                recs.push(ProvenanceRecord {
                    dataset_id: member.id,
                    source_row: g - member.row_offset,
                });
            }
            resident.add(group.len());
            writer.append_rows(&staged)?;
            resident.sub(group.len());
            for rec in recs {
                prov.push(rec)?;
                records.push(rec);
            }
        }
        resident.sub(order.len());
    }

    let manifest = ProvenanceManifest {
        format_version: FORMAT_VERSION,
        record: RECORD_KIND.into(),
        n_obs: 0,
        chunk_rows: output.chunk_rows,
        chunks_per_shard: output.chunks_per_shard,
        codec: output.codec,
        prng: PRNG_NAME.into(),
        seed: plan.seed,
        block_rows: plan.block_rows,
        buffer_rows: plan.buffer_rows,
        join_mode: collection.join_mode(),
        inputs: members
            .iter()
            .map(|m| {
                std::fs::canonicalize(m.store.root())
                    .unwrap_or_else(|_| m.store.root().to_path_buf())
                    .to_string_lossy()
                    .into_owned()
            })
            .collect(),
        input_rows: members.iter().map(|m| m.store.n_obs()).collect(),
    };
    prov.finish(manifest)?;
    writer.set_has_provenance(true);
    let rows_written = writer.n_obs();
    let store = writer.finish()?;
    Ok(ShuffleOutput {
        store,
        provenance: ProvenanceMap { records },
        stats: ShuffleStats {
            rounds: plan.rounds.len(),
            rows_written,
            peak_resident_rows: resident.peak,
            io,
        },
    })
}
