//! Provenance sidecar: for every output row, the `(dataset_id, source_row)`
//! it was copied from, stored as 12-byte little-endian records
//! (`u32` then `u64`) in the same chunk/shard layout as a store, under
//! `<root>/provenance/`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{JoinMode, ShuffleError};
use crate::store::shard::{ChunkRequest, IoStats, ShardSetReader, ShardSetWriter};
use crate::store::{Codec, StoreError, MANIFEST_FILE};

pub const PROVENANCE_DIR: &str = "provenance";
pub const RECORD_KIND: &str = "u32_u64";
const RECORD_BYTES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub dataset_id: u32,
    pub source_row: u64,
}

/// Metadata of the sidecar, including everything needed to rebuild the
/// input collection and re-run the shuffle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceManifest {
    pub format_version: u32,
    pub record: String,
    pub n_obs: u64,
    pub chunk_rows: u64,
    pub chunks_per_shard: u64,
    pub codec: Codec,
    pub prng: String,
    pub seed: u64,
    pub block_rows: u64,
    pub buffer_rows: u64,
    pub join_mode: JoinMode,
    /// Input store paths, indexed by dataset id.
    pub inputs: Vec<String>,
    /// Row count of each input, indexed by dataset id.
    pub input_rows: Vec<u64>,
}

/// Output row -> source row map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProvenanceMap {
    pub records: Vec<ProvenanceRecord>,
}

impl ProvenanceMap {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Source rows as indices into the concatenation of the inputs, given
    /// each dataset's row offset.
    pub fn global_indices(&self, offsets: &[u64]) -> Vec<u64> {
        self.records
            .iter()
            .map(|r| offsets[r.dataset_id as usize] + r.source_row)
            .collect()
    }
}

pub fn provenance_dir(store_root: &Path) -> PathBuf {
    store_root.join(PROVENANCE_DIR)
}

pub(crate) struct ProvenanceWriter {
    dir: PathBuf,
    chunk_rows: usize,
    shards: ShardSetWriter,
    pending: Vec<u8>,
    n: u64,
}

impl ProvenanceWriter {
    pub fn create(
        store_root: &Path,
        chunk_rows: u64,
        chunks_per_shard: u64,
        codec: Codec,
    ) -> Result<Self, ShuffleError> {
        let dir = provenance_dir(store_root);
        let shards = ShardSetWriter::new(&dir, chunks_per_shard, codec)?;
        Ok(ProvenanceWriter {
            dir,
            chunk_rows: chunk_rows as usize,
            shards,
            pending: Vec::new(),
            n: 0,
        })
    }

    pub fn push(&mut self, rec: ProvenanceRecord) -> Result<(), ShuffleError> {
        self.pending.extend_from_slice(&rec.dataset_id.to_le_bytes());
        self.pending.extend_from_slice(&rec.source_row.to_le_bytes());
        self.n += 1;
        if self.pending.len() == self.chunk_rows * RECORD_BYTES {
            self.shards.push_chunk(&self.pending)?;
            self.pending.clear();
        }
        Ok(())
    }

    pub fn finish(mut self, mut manifest: ProvenanceManifest) -> Result<(), ShuffleError> {
        if !self.pending.is_empty() {
            self.shards.push_chunk(&self.pending)?;
        }
        self.shards.finish()?;
        manifest.n_obs = self.n;
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        crate::store::write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(())
    }
}

pub fn read_provenance_manifest(store_root: &Path) -> Result<ProvenanceManifest, ShuffleError> {
    let path = provenance_dir(store_root).join(MANIFEST_FILE);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ShuffleError::MissingProvenance(store_root.to_path_buf()))
        }
        Err(e) => return Err(StoreError::Io { path, source: e }.into()),
    };
    let m: ProvenanceManifest = serde_json::from_str(&text)
        .map_err(|e| ShuffleError::CorruptProvenance(format!("manifest: {e}")))?;
    if m.record != RECORD_KIND || m.chunk_rows == 0 || m.chunks_per_shard == 0 {
        return Err(ShuffleError::CorruptProvenance(format!(
            "unsupported record layout `{}` / chunking",
            m.record
        )));
    }
    if m.inputs.len() != m.input_rows.len() {
        return Err(ShuffleError::CorruptProvenance("inputs and input_rows differ in length".into()));
    }
    Ok(m)
}

/// Loads the whole sidecar of the store at `store_root`.
pub fn read_provenance(store_root: &Path) -> Result<(ProvenanceManifest, ProvenanceMap), ShuffleError> {
    let m = read_provenance_manifest(store_root)?;
    let chunk_count = m.n_obs.div_ceil(m.chunk_rows);
    let reader = ShardSetReader::new(
        &provenance_dir(store_root),
        m.chunks_per_shard,
        chunk_count,
        m.codec,
    );
    let mut records = Vec::with_capacity(m.n_obs as usize);
    let mut stats = IoStats::default();
    let batch = 256u64;
    let mut chunk = 0;
    while chunk < chunk_count {
        let reqs: Vec<ChunkRequest> = (chunk..(chunk + batch).min(chunk_count))
            .map(|c| ChunkRequest { chunk: c, part: None })
            .collect();
        for (req, raw) in reqs.iter().zip(reader.fetch(&reqs, false, &mut stats)?) {
            let rows = (m.n_obs - req.chunk * m.chunk_rows).min(m.chunk_rows) as usize;
            if raw.len() != rows * RECORD_BYTES {
                return Err(ShuffleError::CorruptProvenance(format!(
                    "chunk {} is {} bytes, expected {}",
                    req.chunk,
                    raw.len(),
                    rows * RECORD_BYTES
                )));
            }
            records.extend(raw.chunks_exact(RECORD_BYTES).map(|r| ProvenanceRecord {
                dataset_id: u32::from_le_bytes(r[..4].try_into().unwrap()),
                source_row: u64::from_le_bytes(r[4..].try_into().unwrap()),
            }));
        }
        chunk += batch;
    }
    Ok((m, ProvenanceMap { records }))
}
