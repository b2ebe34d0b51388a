//! Chunked, sharded on-disk observation matrices (dense or CSR).
//!
//! A store lives in a directory:
//!
//! ```text
//! <root>/manifest.json
//! <root>/shards/s00000000.bin
//! <root>/shards/s00000001.bin
//! ```
//!
//! Rows are grouped into chunks of `chunk_rows` rows (the last one may be
//! short); `chunks_per_shard` consecutive chunks share a shard file. CSR
//! chunks are row-aligned: each holds complete rows with a local indptr.

mod block;
pub mod codec;
mod io;
mod manifest;
mod plan;
mod record;
pub mod shard;
mod values;

use std::path::{Path, PathBuf};

pub use block::{to_csr, to_dense, CsrBlock, DenseBlock, Layout, RowBlock};
pub use manifest::{Codec, IndexDtype, StoreManifest, FORMAT_VERSION, MANIFEST_FILE};
pub use plan::{plan_read, ChunkRead, ChunkSlice, ReadPlan, RowRange};
pub use shard::IoStats;
pub use values::{ValueDtype, Values};

use shard::{ChunkRequest, ShardSetReader, ShardSetWriter, SHARDS_DIR};

/// Marker present while a writer owns the store; a store without a manifest
/// but with this marker is an unfinished output.
pub const WRITER_LOCK: &str = ".writing";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("a store already exists at {}", .0.display())]
    AlreadyExists(PathBuf),
    #[error("no store manifest under {}", .0.display())]
    NotFound(PathBuf),
    #[error("store at {} is being written (remove {WRITER_LOCK} if a writer crashed)", .0.display())]
    Locked(PathBuf),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid store configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("block does not match store: {0}")]
    Mismatch(String),
    #[error("row range {start}..{end} is invalid for a store of {n_obs} rows")]
    OutOfBounds { start: u64, end: u64, n_obs: u64 },
    #[error("row ranges {}..{} and {}..{} overlap", .0.start, .0.end, .1.start, .1.end)]
    Overlap(RowRange, RowRange),
    #[error("corrupt chunk {chunk}: {reason}")]
    CorruptChunk { chunk: u64, reason: String },
    #[error("corrupt shard {shard}: {reason}")]
    CorruptShard { shard: u64, reason: String },
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for errors caused by damaged or unreadable data rather than misuse.
    pub fn is_io_or_corruption(&self) -> bool {
        matches!(
            self,
            StoreError::Io { .. }
                | StoreError::CorruptChunk { .. }
                | StoreError::CorruptShard { .. }
                | StoreError::InvalidManifest(_)
                | StoreError::NotFound(_)
        )
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| StoreError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

/// Layout and chunking parameters for a new store.
#[derive(Clone, Debug, PartialEq)]
pub struct StoreOptions {
    pub var_names: Vec<String>,
    pub layout: Layout,
    pub value_dtype: ValueDtype,
    /// CSR only; defaults to `u32` when unset.
    pub index_dtype: Option<IndexDtype>,
    pub chunk_rows: u64,
    pub chunks_per_shard: u64,
    pub codec: Codec,
}

impl StoreOptions {
    pub fn new(layout: Layout, value_dtype: ValueDtype, var_names: Vec<String>) -> Self {
        StoreOptions {
            var_names,
            layout,
            value_dtype,
            index_dtype: None,
            chunk_rows: 256,
            chunks_per_shard: 128,
            codec: Codec::None,
        }
    }

    pub fn chunking(mut self, chunk_rows: u64, chunks_per_shard: u64) -> Self {
        self.chunk_rows = chunk_rows;
        self.chunks_per_shard = chunks_per_shard;
        self
    }

    pub fn codec(mut self, codec: Codec) -> Self {
        self.codec = codec;
        self
    }

    fn manifest(&self) -> Result<StoreManifest, StoreError> {
        let index_dtype = match (self.layout, self.index_dtype) {
            (Layout::Dense, Some(_)) => {
                return Err(StoreError::InvalidConfig(
                    "index_dtype only applies to csr stores".into(),
                ))
            }
            (Layout::Dense, None) => None,
            (Layout::Csr, ix) => Some(ix.unwrap_or(IndexDtype::U32)),
        };
        let m = StoreManifest {
            format_version: FORMAT_VERSION,
            layout: self.layout,
            n_obs: 0,
            n_var: self.var_names.len() as u64,
            value_dtype: self.value_dtype,
            index_dtype,
            chunk_rows: self.chunk_rows,
            chunks_per_shard: self.chunks_per_shard,
            codec: self.codec,
            var_names: self.var_names.clone(),
            has_provenance: false,
        };
        m.validate().map_err(|e| match e {
            StoreError::InvalidManifest(msg) => StoreError::InvalidConfig(msg),
            other => other,
        })?;
        Ok(m)
    }
}

/// Creates an empty store at `path` and returns its writer.
pub fn create_store(path: &Path, options: &StoreOptions) -> Result<StoreWriter, StoreError> {
    StoreWriter::create(path, options, true)
}

/// Opens a finished store for reading.
pub fn open_store(path: &Path) -> Result<Store, StoreError> {
    Store::open(path)
}

/// Append-only writer. Holds back a trailing partial chunk until more rows
/// arrive or [`StoreWriter::finish`] is called.
pub struct StoreWriter {
    root: PathBuf,
    manifest: StoreManifest,
    shards: ShardSetWriter,
    pending: RowBlock,
    publish_early: bool,
    finished: bool,
}

impl std::fmt::Debug for StoreWriter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StoreWriter")
            .field("root", &self.root)
            .field("n_obs", &self.manifest.n_obs)
            .finish()
    }
}

fn acquire_lock(root: &Path) -> Result<(), StoreError> {
    let lock = root.join(WRITER_LOCK);
    match std::fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&lock)
    {
        Ok(_) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
            Err(StoreError::Locked(root.to_path_buf()))
        }
        Err(e) => Err(StoreError::io(&lock, e)),
    }
}

impl StoreWriter {
    /// With `publish_early` unset no manifest exists until `finish`, so an
    /// interrupted write is never mistaken for a store.
    pub(crate) fn create(
        path: &Path,
        options: &StoreOptions,
        publish_early: bool,
    ) -> Result<Self, StoreError> {
        let manifest = options.manifest()?;
        if path.join(MANIFEST_FILE).exists() {
            return Err(StoreError::AlreadyExists(path.to_path_buf()));
        }
        if path.join(WRITER_LOCK).exists() {
            return Err(StoreError::Locked(path.to_path_buf()));
        }
        let shards_dir = path.join(SHARDS_DIR);
        if shards_dir.exists()
            && std::fs::read_dir(&shards_dir)
                .map_err(|e| StoreError::io(&shards_dir, e))?
                .next()
                .is_some()
        {
            return Err(StoreError::AlreadyExists(path.to_path_buf()));
        }
        std::fs::create_dir_all(path).map_err(|e| StoreError::io(path, e))?;
        acquire_lock(path)?;
        let shards = ShardSetWriter::new(path, manifest.chunks_per_shard, manifest.codec)?;
        if publish_early {
            manifest.write(path)?;
        }
        let pending = RowBlock::empty(manifest.layout, manifest.value_dtype, manifest.n_var as usize);
        Ok(StoreWriter {
            root: path.to_path_buf(),
            manifest,
            shards,
            pending,
            publish_early,
            finished: false,
        })
    }

    /// Reopens a finished store to append more rows.
    pub fn open_append(path: &Path) -> Result<Self, StoreError> {
        let manifest = StoreManifest::read(path)?;
        if manifest.has_provenance {
            return Err(StoreError::InvalidConfig(
                "store carries a provenance sidecar; appending would invalidate it".into(),
            ));
        }
        let tail_rows = manifest.n_obs % manifest.chunk_rows;
        let full_chunks = manifest.n_obs / manifest.chunk_rows;
        let pending = if tail_rows > 0 {
            let reader = Store::open(path)?;
            let start = full_chunks * manifest.chunk_rows;
            reader
                .read_rows(&[RowRange::new(start, manifest.n_obs)], false)?
                .0
        } else {
            RowBlock::empty(manifest.layout, manifest.value_dtype, manifest.n_var as usize)
        };
        acquire_lock(path)?;
        let shards =
            ShardSetWriter::resume(path, manifest.chunks_per_shard, manifest.codec, full_chunks)?;
        Ok(StoreWriter {
            root: path.to_path_buf(),
            manifest,
            shards,
            pending,
            publish_early: true,
            finished: false,
        })
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn n_obs(&self) -> u64 {
        self.manifest.n_obs
    }

    pub(crate) fn set_has_provenance(&mut self, yes: bool) {
        self.manifest.has_provenance = yes;
    }

    fn check(&self, block: &RowBlock) -> Result<(), StoreError> {
        let m = &self.manifest;
        if block.layout() != m.layout {
            return Err(StoreError::Mismatch(format!(
                "{} block for a {} store",
                block.layout(),
                m.layout
            )));
        }
        if block.n_var() as u64 != m.n_var {
            return Err(StoreError::Mismatch(format!(
                "block has {} columns, store has {}",
                block.n_var(),
                m.n_var
            )));
        }
        if block.dtype() != m.value_dtype {
            return Err(StoreError::Mismatch(format!(
                "block values are {}, store values are {}",
                block.dtype().name(),
                m.value_dtype.name()
            )));
        }
        block.validate()
    }

    fn push_rows(&mut self, block: &RowBlock, rows: std::ops::Range<usize>) -> Result<(), StoreError> {
        let raw = record::encode_rows(&self.manifest, block, rows)?;
        self.shards.push_chunk(&raw)
    }

    /// Appends a block, returning the new row count.
    pub fn append_rows(&mut self, block: &RowBlock) -> Result<u64, StoreError> {
        self.check(block)?;
        let chunk = self.manifest.chunk_rows as usize;
        let n = block.n_rows();
        let mut row = 0;
        if self.pending.n_rows() > 0 {
            let take = (chunk - self.pending.n_rows()).min(n);
            self.pending.extend_rows(block, 0..take);
            row = take;
            if self.pending.n_rows() == chunk {
                let full = std::mem::replace(
                    &mut self.pending,
                    RowBlock::empty(block.layout(), block.dtype(), block.n_var()),
                );
                self.push_rows(&full, 0..chunk)?;
            }
        }
        while n - row >= chunk {
            self.push_rows(block, row..row + chunk)?;
            row += chunk;
        }
        self.pending.extend_rows(block, row..n);
        self.manifest.n_obs += n as u64;
        Ok(self.manifest.n_obs)
    }

    /// Flushes the trailing chunk, finalizes the last shard and publishes the manifest.
    pub fn finish(mut self) -> Result<Store, StoreError> {
        if self.pending.n_rows() > 0 {
            let tail = std::mem::replace(
                &mut self.pending,
                RowBlock::empty(self.manifest.layout, self.manifest.value_dtype, 0),
            );
            self.push_rows(&tail, 0..tail.n_rows())?;
        }
        self.shards.finish()?;
        debug_assert_eq!(self.shards.chunks_written(), self.manifest.chunk_count());
        self.manifest.write(&self.root)?;
        self.finished = true;
        let lock = self.root.join(WRITER_LOCK);
        std::fs::remove_file(&lock).map_err(|e| StoreError::io(&lock, e))?;
        Store::open(&self.root)
    }
}

impl Drop for StoreWriter {
    fn drop(&mut self) {
        // an unpublished, unfinished output keeps its marker
        if !self.finished && self.publish_early {
            let _ = std::fs::remove_file(self.root.join(WRITER_LOCK));
        }
    }
}

/// Read handle on a finished store. Shareable across threads.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    manifest: StoreManifest,
    shards: ShardSetReader,
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        if path.join(WRITER_LOCK).exists() {
            return Err(StoreError::Locked(path.to_path_buf()));
        }
        let manifest = StoreManifest::read(path)?;
        let shards = ShardSetReader::new(
            path,
            manifest.chunks_per_shard,
            manifest.chunk_count(),
            manifest.codec,
        );
        Ok(Store {
            root: path.to_path_buf(),
            manifest,
            shards,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn n_obs(&self) -> u64 {
        self.manifest.n_obs
    }

    pub fn n_var(&self) -> usize {
        self.manifest.n_var as usize
    }

    pub fn plan(&self, ranges: &[RowRange]) -> Result<ReadPlan, StoreError> {
        plan_read(self.manifest.n_obs, self.manifest.chunk_rows, ranges)
    }

    /// Reads `ranges` (pairwise disjoint) and concatenates them in the given order.
    pub fn read_rows(
        &self,
        ranges: &[RowRange],
        cache_bypass: bool,
    ) -> Result<(RowBlock, IoStats), StoreError> {
        let plan = self.plan(ranges)?;
        self.execute(&plan, cache_bypass)
    }

    /// Reads every row.
    pub fn read_all(&self) -> Result<RowBlock, StoreError> {
        let m = &self.manifest;
        if m.n_obs == 0 {
            return Ok(RowBlock::empty(m.layout, m.value_dtype, m.n_var as usize));
        }
        Ok(self.read_rows(&[RowRange::new(0, m.n_obs)], false)?.0)
    }

    pub fn execute(&self, plan: &ReadPlan, cache_bypass: bool) -> Result<(RowBlock, IoStats), StoreError> {
        let m = &self.manifest;
        let n_var = m.n_var as usize;
        // uncompressed dense records can be read partially
        let partial = m.codec == Codec::None && m.layout == Layout::Dense;
        let row_bytes = m.dense_row_bytes();
        let reqs: Vec<ChunkRequest> = plan
            .chunks
            .iter()
            .map(|c| ChunkRequest {
                chunk: c.chunk_id,
                part: partial.then(|| {
                    let s = c.span();
                    s.start * row_bytes..s.end * row_bytes
                }),
            })
            .collect();
        let mut stats = IoStats::default();
        let raws = self.shards.fetch(&reqs, cache_bypass, &mut stats)?;

        let chunk_len = |id: u64| {
            let r = m.chunk_rows_range(id);
            (r.end - r.start) as usize
        };
        let block = match m.layout {
            Layout::Dense => {
                let mut values = Values::zeros(m.value_dtype, plan.total_rows * n_var);
                for (c, raw) in plan.chunks.iter().zip(raws) {
                    let (base, decoded) = if partial {
                        (c.span().start, Values::read_le(m.value_dtype, &raw))
                    } else {
                        match record::decode_chunk(m, c.chunk_id, chunk_len(c.chunk_id), &raw)? {
                            RowBlock::Dense(d) => (0, d.values),
                            RowBlock::Csr(_) => unreachable!(),
                        }
                    };
                    for s in &c.slices {
                        values.copy_from(
                            s.output_offset * n_var,
                            &decoded,
                            (s.start - base) * n_var,
                            (s.end - s.start) * n_var,
                        );
                    }
                }
                RowBlock::Dense(DenseBlock {
                    n_rows: plan.total_rows,
                    n_var,
                    values,
                })
            }
            Layout::Csr => {
                let mut pieces = Vec::new();
                for (c, raw) in plan.chunks.iter().zip(raws) {
                    let decoded = record::decode_chunk(m, c.chunk_id, chunk_len(c.chunk_id), &raw)?;
                    for s in &c.slices {
                        pieces.push((s.output_offset, decoded.slice_rows(s.start..s.end)));
                    }
                }
                pieces.sort_unstable_by_key(|p| p.0);
                RowBlock::concat(m.layout, m.value_dtype, n_var, pieces.iter().map(|p| &p.1))
            }
        };
        Ok((block, stats))
    }
}
