use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use serde::Serialize;

use super::provenance::{ProvenanceManifest, ProvenanceMap};
use super::{DatasetCollection, ShuffleError};
use crate::rng::{self, Purpose};
use crate::store::{RowRange, Store};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowCount { store_rows: u64, provenance_rows: u64, collection_rows: u64 },
    UnknownDataset { output_row: u64, dataset_id: u32 },
    SourceOutOfRange { output_row: u64, dataset_id: u32, source_row: u64 },
    DuplicateSource { output_row: u64, first_output_row: u64, dataset_id: u32, source_row: u64 },
    UncoveredSources { dataset_id: u32, count: u64 },
    ValueMismatch { output_row: u64, dataset_id: u32, source_row: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowCount { store_rows, provenance_rows, collection_rows } => write!(
                f,
                "row counts differ: store {store_rows}, provenance {provenance_rows}, inputs {collection_rows}"
            ),
            Violation::UnknownDataset { output_row, dataset_id } => {
                write!(f, "output row {output_row}: unknown dataset {dataset_id}")
            }
            Violation::SourceOutOfRange { output_row, dataset_id, source_row } => write!(
                f,
                "output row {output_row}: source row {source_row} beyond dataset {dataset_id}"
            ),
            Violation::DuplicateSource { output_row, first_output_row, dataset_id, source_row } => write!(
                f,
                "output row {output_row}: source ({dataset_id}, {source_row}) already used by output row {first_output_row}"
            ),
            Violation::UncoveredSources { dataset_id, count } => {
                write!(f, "dataset {dataset_id}: {count} source rows never emitted")
            }
            Violation::ValueMismatch { output_row, dataset_id, source_row } => write!(
                f,
                "output row {output_row}: values differ from source ({dataset_id}, {source_row})"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub rows: u64,
    pub sampled_rows: u64,
    pub bijective: bool,
    pub violation_count: u64,
    /// At most `max_listed` violations, in discovery order.
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violation_count == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Rows whose values are compared; `None` compares every row.
    pub sample_rows: Option<u64>,
    pub seed: u64,
    pub max_listed: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            sample_rows: Some(10_000),
            seed: 0,
            max_listed: 100,
        }
    }
}

struct Collector {
    max: usize,
    count: u64,
    list: Vec<Violation>,
}

impl Collector {
    fn push(&mut self, v: Violation) {
        self.count += 1;
        if self.list.len() < self.max {
            self.list.push(v);
        }
    }
}

const READ_BATCH: usize = 4096;

/// Checks that `provenance` is a bijection onto the rows of `collection` and
/// that sampled output rows equal their named sources after column
/// reprojection.
pub fn verify_shuffle(
    store: &Store,
    provenance: &ProvenanceMap,
    collection: &DatasetCollection,
    options: &VerifyOptions,
) -> Result<VerifyReport, ShuffleError> {
    let members = collection.members();
    let mut out = Collector {
        max: options.max_listed,
        count: 0,
        list: Vec::new(),
    };
    let n = store.n_obs();
    if provenance.len() as u64 != n || collection.total_rows() != n {
        out.push(Violation::RowCount {
            store_rows: n,
            provenance_rows: provenance.len() as u64,
            collection_rows: collection.total_rows(),
        });
    }

    // first output row claiming each source row, per dataset
    let mut claimed: Vec<Vec<u64>> = members
        .iter()
        .map(|m| vec![u64::MAX; m.store.n_obs() as usize])
        .collect();
    // output rows whose record is unusable for value checks
    let mut unusable = vec![false; provenance.len()];
    for (row, rec) in provenance.records.iter().enumerate() {
        let row_u = row as u64;
        let Some(slots) = claimed.get_mut(rec.dataset_id as usize) else {
            out.push(Violation::UnknownDataset { output_row: row_u, dataset_id: rec.dataset_id });
            unusable[row] = true;
            continue;
        };
        let Some(slot) = slots.get_mut(rec.source_row as usize) else {
            out.push(Violation::SourceOutOfRange {
                output_row: row_u,
                dataset_id: rec.dataset_id,
                source_row: rec.source_row,
            });
            unusable[row] = true;
            continue;
        };
        if *slot != u64::MAX {
            out.push(Violation::DuplicateSource {
                output_row: row_u,
                first_output_row: *slot,
                dataset_id: rec.dataset_id,
                source_row: rec.source_row,
            });
            unusable[row] = true;
            unusable[*slot as usize] = true;
        } else {
            *slot = row_u;
        }
    }
    for (m, slots) in members.iter().zip(&claimed) {
        let missing = slots.iter().filter(|&&s| s == u64::MAX).count() as u64;
        if missing > 0 {
            out.push(Violation::UncoveredSources { dataset_id: m.id, count: missing });
        }
    }
    let bijective = out.count == 0;
    drop(claimed);

    let rows = provenance.len().min(n as usize);
    let mut sample: Vec<usize> = match options.sample_rows {
        Some(k) if (k as usize) < rows => {
            let mut r = rng::stream(options.seed, Purpose::VerifySample, 0);
            index::sample(&mut r, rows, k as usize).into_vec()
        }
        _ => (0..rows).collect(),
    };
    sample.retain(|&r| !unusable[r]);
    sample.sort_unstable();
    let sampled_rows = sample.len() as u64;

    for batch in sample.chunks(READ_BATCH) {
        let out_ranges: Vec<RowRange> = batch
            .iter()
            .map(|&r| RowRange::new(r as u64, r as u64 + 1))
            .collect();
        let (got, _) = store.read_rows(&out_ranges, false)?;
        // per dataset: positions in `batch` and their source ranges
        let mut by_member: HashMap<usize, (Vec<usize>, Vec<RowRange>)> = HashMap::new();
        for (pos, &r) in batch.iter().enumerate() {
            let rec = provenance.records[r];
            let e = by_member.entry(rec.dataset_id as usize).or_default();
            e.0.push(pos);
            e.1.push(RowRange::new(rec.source_row, rec.source_row + 1));
        }
        let mut members_sorted: Vec<_> = by_member.into_iter().collect();
        members_sorted.sort_unstable_by_key(|e| e.0);
        for (idx, (positions, ranges)) in members_sorted {
            let (src, _) = members[idx].store.read_rows(&ranges, false)?;
            let src = collection.reproject(idx, src);
            for (k, &pos) in positions.iter().enumerate() {
                if !got.row_eq(pos, &src, k) {
                    let rec = provenance.records[batch[pos]];
                    out.push(Violation::ValueMismatch {
                        output_row: batch[pos] as u64,
                        dataset_id: rec.dataset_id,
                        source_row: rec.source_row,
                    });
                }
            }
        }
    }

    Ok(VerifyReport {
        rows: n,
        sampled_rows,
        bijective,
        violation_count: out.count,
        violations: out.list,
    })
}

/// Rebuilds the input collection recorded in a provenance manifest.
pub fn collection_from_manifest(m: &ProvenanceManifest) -> Result<DatasetCollection, ShuffleError> {
    let mut c = DatasetCollection::new(m.join_mode);
    for (path, &rows) in m.inputs.iter().zip(&m.input_rows) {
        let store = Store::open(std::path::Path::new(path))?;
        if store.n_obs() != rows {
            return Err(ShuffleError::Incompatible(format!(
                "input {path} now has {} rows, the shuffle recorded {rows}",
                store.n_obs()
            )));
        }
        c.add_dataset(std::sync::Arc::new(store))?;
    }
    Ok(c)
}
