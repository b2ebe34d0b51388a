//! Shard files: concatenated encoded chunk records followed by a footer of
//! `(offset: u64 LE, nbytes: u64 LE)` per chunk slot and the magic `SHRDIDX1`.
//!
//! The writer and reader here deal in raw chunk records; interpreting them is
//! left to the caller, so the provenance sidecar reuses the same machinery.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::codec;
use super::io;
use super::manifest::Codec;
use super::StoreError;

pub const SHARD_MAGIC: &[u8; 8] = b"SHRDIDX1";
pub const EMPTY_SLOT: u64 = u64::MAX;
pub const SHARDS_DIR: &str = "shards";

const FILE_CACHE_LIMIT: usize = 64;

pub fn shard_path(root: &Path, shard: u64) -> PathBuf {
    root.join(SHARDS_DIR).join(format!("s{shard:08}.bin"))
}

pub fn footer_len(chunks_per_shard: u64) -> u64 {
    chunks_per_shard * 16 + SHARD_MAGIC.len() as u64
}

/// Counters for one or more read calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IoStats {
    /// Positional read calls issued against shard files (footers excluded).
    pub read_ops: u64,
    pub bytes_read: u64,
    pub chunk_decodes: u64,
    /// Whether the caller asked to bypass the page cache.
    pub cache_bypass_requested: bool,
    /// Read calls that actually went through unbuffered I/O.
    pub direct_read_ops: u64,
}

impl IoStats {
    pub fn cache_bypass_honored(&self) -> bool {
        self.cache_bypass_requested && self.read_ops > 0 && self.direct_read_ops == self.read_ops
    }
}

impl std::ops::AddAssign for IoStats {
    fn add_assign(&mut self, rhs: Self) {
        self.read_ops += rhs.read_ops;
        self.bytes_read += rhs.bytes_read;
        self.chunk_decodes += rhs.chunk_decodes;
        self.cache_bypass_requested |= rhs.cache_bypass_requested;
        self.direct_read_ops += rhs.direct_read_ops;
    }
}

/// Parsed shard footer: one `(offset, nbytes)` per slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardIndex {
    pub entries: Vec<(u64, u64)>,
}

impl ShardIndex {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.entries.len() * 16 + 8);
        for &(off, n) in &self.entries {
            out.extend_from_slice(&off.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
        }
        out.extend_from_slice(SHARD_MAGIC);
        out
    }

    /// Parses and checks the footer of a shard file of `file_len` bytes.
    ///
    /// The first `filled` slots must index records laid end to end from
    /// offset 0 up to the footer; the remaining slots must be empty.
    fn parse(
        shard: u64,
        footer: &[u8],
        file_len: u64,
        chunks_per_shard: u64,
        filled: Option<u64>,
    ) -> Result<Self, StoreError> {
        let corrupt = |reason: String| StoreError::CorruptShard { shard, reason };
        let flen = footer_len(chunks_per_shard);
        if footer.len() as u64 != flen || &footer[footer.len() - 8..] != SHARD_MAGIC {
            return Err(corrupt("missing footer magic".into()));
        }
        let entries: Vec<(u64, u64)> = footer[..footer.len() - 8]
            .chunks_exact(16)
            .map(|e| {
                (
                    u64::from_le_bytes(e[..8].try_into().unwrap()),
                    u64::from_le_bytes(e[8..].try_into().unwrap()),
                )
            })
            .collect();
        let data_end = file_len - flen;
        let used = entries.iter().take_while(|e| e.0 != EMPTY_SLOT).count() as u64;
        if let Some(expected) = filled {
            if used != expected {
                return Err(corrupt(format!("footer indexes {used} chunks, expected {expected}")));
            }
        }
        if entries[used as usize..].iter().any(|e| e.0 != EMPTY_SLOT) {
            return Err(corrupt("non-empty slot after an empty one".into()));
        }
        let mut pos = 0u64;
        for (slot, &(off, n)) in entries[..used as usize].iter().enumerate() {
            if off != pos {
                return Err(corrupt(format!("slot {slot} starts at {off}, expected {pos}")));
            }
            pos = off
                .checked_add(n)
                .ok_or_else(|| corrupt(format!("slot {slot} length overflows")))?;
        }
        if pos != data_end {
            return Err(corrupt(format!(
                "records end at {pos} but footer starts at {data_end}"
            )));
        }
        Ok(ShardIndex { entries })
    }
}

fn read_footer(
    path: &Path,
    shard: u64,
    chunks_per_shard: u64,
    filled: Option<u64>,
) -> Result<ShardIndex, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let len = file.metadata().map_err(|e| StoreError::io(path, e))?.len();
    let flen = footer_len(chunks_per_shard);
    if len < flen {
        return Err(StoreError::CorruptShard {
            shard,
            reason: format!("file is {len} bytes, shorter than its {flen}-byte footer"),
        });
    }
    let footer = io::read_exact_at(&file, len - flen, flen as usize)
        .map_err(|e| StoreError::io(path, e))?;
    ShardIndex::parse(shard, &footer, len, chunks_per_shard, filled)
}

struct OpenShard {
    index: u64,
    path: PathBuf,
    file: BufWriter<File>,
    entries: Vec<(u64, u64)>,
    pos: u64,
}

/// Streams chunk records into consecutive shard files.
pub struct ShardSetWriter {
    root: PathBuf,
    chunks_per_shard: u64,
    codec: Codec,
    next_chunk: u64,
    current: Option<OpenShard>,
}

impl ShardSetWriter {
    pub fn new(root: &Path, chunks_per_shard: u64, codec: Codec) -> Result<Self, StoreError> {
        let dir = root.join(SHARDS_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        Ok(ShardSetWriter {
            root: root.to_path_buf(),
            chunks_per_shard,
            codec,
            next_chunk: 0,
            current: None,
        })
    }

    /// Reopens a shard set so that the next record written is chunk `next_chunk`.
    /// Records at or after `next_chunk` in its shard are discarded.
    pub fn resume(
        root: &Path,
        chunks_per_shard: u64,
        codec: Codec,
        next_chunk: u64,
    ) -> Result<Self, StoreError> {
        let mut w = Self::new(root, chunks_per_shard, codec)?;
        w.next_chunk = next_chunk;
        let shard = next_chunk / chunks_per_shard;
        let keep = (next_chunk % chunks_per_shard) as usize;
        if keep > 0 {
            let path = shard_path(root, shard);
            let index = read_footer(&path, shard, chunks_per_shard, None)?;
            let mut entries = vec![(EMPTY_SLOT, 0); chunks_per_shard as usize];
            entries[..keep].copy_from_slice(&index.entries[..keep]);
            if entries[keep - 1].0 == EMPTY_SLOT {
                return Err(StoreError::CorruptShard {
                    shard,
                    reason: format!("expected at least {keep} chunks"),
                });
            }
            let pos = entries[keep - 1].0 + entries[keep - 1].1;
            let mut file = OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(|e| StoreError::io(&path, e))?;
            file.set_len(pos).map_err(|e| StoreError::io(&path, e))?;
            file.seek(SeekFrom::Start(pos))
                .map_err(|e| StoreError::io(&path, e))?;
            w.current = Some(OpenShard {
                index: shard,
                path,
                file: BufWriter::new(file),
                entries,
                pos,
            });
        }
        Ok(w)
    }

    pub fn chunks_written(&self) -> u64 {
        self.next_chunk
    }

    /// Applies the codec to `raw` and appends it as the next chunk.
    pub fn push_chunk(&mut self, raw: &[u8]) -> Result<(), StoreError> {
        let shard = self.next_chunk / self.chunks_per_shard;
        let slot = (self.next_chunk % self.chunks_per_shard) as usize;
        if self.current.is_none() {
            let path = shard_path(&self.root, shard);
            let file = File::create(&path).map_err(|e| StoreError::io(&path, e))?;
            self.current = Some(OpenShard {
                index: shard,
                path,
                file: BufWriter::with_capacity(1 << 20, file),
                entries: vec![(EMPTY_SLOT, 0); self.chunks_per_shard as usize],
                pos: 0,
            });
        }
        let encoded = codec::encode(self.codec, raw);
        let cur = self.current.as_mut().unwrap();
        debug_assert_eq!(cur.index, shard);
        cur.file
            .write_all(&encoded)
            .map_err(|e| StoreError::io(&cur.path, e))?;
        cur.entries[slot] = (cur.pos, encoded.len() as u64);
        cur.pos += encoded.len() as u64;
        self.next_chunk += 1;
        if slot + 1 == self.chunks_per_shard as usize {
            self.finalize_current()?;
        }
        Ok(())
    }

    fn finalize_current(&mut self) -> Result<(), StoreError> {
        if let Some(mut cur) = self.current.take() {
            let footer = ShardIndex {
                entries: cur.entries,
            }
            .encode();
            cur.file
                .write_all(&footer)
                .and_then(|_| cur.file.flush())
                .map_err(|e| StoreError::io(&cur.path, e))?;
        }
        Ok(())
    }

    /// Writes the footer of a partially filled last shard.
    pub fn finish(&mut self) -> Result<(), StoreError> {
        self.finalize_current()
    }
}

/// A contiguous part of one chunk record to fetch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkRequest {
    pub chunk: u64,
    /// Byte sub-range of the record; only valid for uncompressed records.
    pub part: Option<Range<usize>>,
}

/// Read side of a shard set. Shareable across threads.
pub struct ShardSetReader {
    root: PathBuf,
    chunks_per_shard: u64,
    chunk_count: u64,
    codec: Codec,
    indices: Mutex<HashMap<u64, Arc<ShardIndex>>>,
    files: Mutex<HashMap<(u64, bool), Arc<File>>>,
    direct_unavailable: AtomicBool,
}

impl std::fmt::Debug for ShardSetReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShardSetReader")
            .field("root", &self.root)
            .field("chunks_per_shard", &self.chunks_per_shard)
            .field("chunk_count", &self.chunk_count)
            .finish()
    }
}

impl ShardSetReader {
    pub fn new(root: &Path, chunks_per_shard: u64, chunk_count: u64, codec: Codec) -> Self {
        ShardSetReader {
            root: root.to_path_buf(),
            chunks_per_shard,
            chunk_count,
            codec,
            indices: Mutex::new(HashMap::new()),
            files: Mutex::new(HashMap::new()),
            direct_unavailable: AtomicBool::new(false),
        }
    }

    pub fn shard_index(&self, shard: u64) -> Result<Arc<ShardIndex>, StoreError> {
        if let Some(ix) = self.indices.lock().unwrap().get(&shard) {
            return Ok(ix.clone());
        }
        let filled = (self.chunk_count - shard * self.chunks_per_shard).min(self.chunks_per_shard);
        let ix = Arc::new(read_footer(
            &shard_path(&self.root, shard),
            shard,
            self.chunks_per_shard,
            Some(filled),
        )?);
        self.indices.lock().unwrap().insert(shard, ix.clone());
        Ok(ix)
    }

    fn file(&self, shard: u64, direct: bool) -> std::io::Result<Arc<File>> {
        let mut files = self.files.lock().unwrap();
        if let Some(f) = files.get(&(shard, direct)) {
            return Ok(f.clone());
        }
        let path = shard_path(&self.root, shard);
        let f = Arc::new(if direct {
            io::open_direct(&path)?
        } else {
            io::open_buffered(&path)?
        });
        if files.len() >= FILE_CACHE_LIMIT {
            files.clear();
        }
        files.insert((shard, direct), f.clone());
        Ok(f)
    }

    /// One positional read. Returns the bytes and whether it bypassed the cache.
    fn read_span(
        &self,
        shard: u64,
        offset: u64,
        len: usize,
        bypass: bool,
    ) -> Result<(Vec<u8>, bool), StoreError> {
        let path = || shard_path(&self.root, shard);
        if bypass && !self.direct_unavailable.load(Ordering::Relaxed) {
            let attempt = self
                .file(shard, true)
                .and_then(|f| io::read_direct_at(&f, offset, len));
            match attempt {
                Ok(bytes) => return Ok((bytes, true)),
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                    return Err(StoreError::CorruptShard {
                        shard,
                        reason: "read past end of file".into(),
                    })
                }
                // not supported by this filesystem; fall back silently
                Err(_) => self.direct_unavailable.store(true, Ordering::Relaxed),
            }
        }
        let f = self.file(shard, false).map_err(|e| StoreError::io(&path(), e))?;
        match io::read_exact_at(&f, offset, len) {
            Ok(bytes) => Ok((bytes, false)),
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(StoreError::CorruptShard {
                shard,
                reason: "read past end of file".into(),
            }),
            Err(e) => Err(StoreError::io(&path(), e)),
        }
    }

    /// Fetches and decodes the requested chunk records, in request order.
    ///
    /// Consecutive requests whose byte spans abut in the same shard are served
    /// by a single read call.
    pub fn fetch(
        &self,
        reqs: &[ChunkRequest],
        bypass: bool,
        stats: &mut IoStats,
    ) -> Result<Vec<Vec<u8>>, StoreError> {
        stats.cache_bypass_requested |= bypass;
        // (shard, file start, file end) per request
        let mut spans = Vec::with_capacity(reqs.len());
        for r in reqs {
            if r.chunk >= self.chunk_count {
                return Err(StoreError::CorruptChunk {
                    chunk: r.chunk,
                    reason: format!("chunk id beyond chunk count {}", self.chunk_count),
                });
            }
            let shard = r.chunk / self.chunks_per_shard;
            let (off, n) = self.shard_index(shard)?.entries[(r.chunk % self.chunks_per_shard) as usize];
            let (start, end) = match &r.part {
                None => (off, off + n),
                Some(p) => {
                    assert_eq!(self.codec, Codec::None, "partial reads need uncompressed records");
                    if p.end as u64 > n {
                        return Err(StoreError::CorruptChunk {
                            chunk: r.chunk,
                            reason: format!("record is {n} bytes, needed {}", p.end),
                        });
                    }
                    (off + p.start as u64, off + p.end as u64)
                }
            };
            spans.push((shard, start, end));
        }

        let mut out = Vec::with_capacity(reqs.len());
        let mut i = 0;
        while i < spans.len() {
            let (shard, start, mut end) = spans[i];
            let mut j = i + 1;
            while j < spans.len() && spans[j].0 == shard && spans[j].1 == end {
                end = spans[j].2;
                j += 1;
            }
            let (bytes, direct) = self.read_span(shard, start, (end - start) as usize, bypass)?;
            stats.read_ops += 1;
            stats.direct_read_ops += direct as u64;
            stats.bytes_read += bytes.len() as u64;
            for k in i..j {
                let (_, s, e) = spans[k];
                let piece = bytes[(s - start) as usize..(e - start) as usize].to_vec();
                let raw = codec::decode(self.codec, piece).map_err(|reason| {
                    StoreError::CorruptChunk {
                        chunk: reqs[k].chunk,
                        reason,
                    }
                })?;
                stats.chunk_decodes += 1;
                out.push(raw);
            }
            i = j;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_set(root: &Path, cps: u64, records: &[Vec<u8>], codec: Codec) {
        let mut w = ShardSetWriter::new(root, cps, codec).unwrap();
        for r in records {
            w.push_chunk(r).unwrap();
        }
        w.finish().unwrap();
    }

    #[test]
    fn footer_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        write_set(dir.path(), 4, &[vec![1, 2, 3], vec![4, 5]], Codec::None);
        let bytes = std::fs::read(shard_path(dir.path(), 0)).unwrap();
        assert_eq!(bytes.len(), 5 + 4 * 16 + 8);
        assert_eq!(&bytes[..5], &[1, 2, 3, 4, 5]);
        let footer = &bytes[5..];
        assert_eq!(u64::from_le_bytes(footer[0..8].try_into().unwrap()), 0);
        assert_eq!(u64::from_le_bytes(footer[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(footer[16..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(footer[24..32].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(footer[32..40].try_into().unwrap()), u64::MAX);
        assert_eq!(&footer[footer.len() - 8..], b"SHRDIDX1");
    }

    #[test]
    fn adjacent_requests_coalesce() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<Vec<u8>> = (0..6u8).map(|i| vec![i; 4]).collect();
        write_set(dir.path(), 4, &recs, Codec::None);
        let r = ShardSetReader::new(dir.path(), 4, 6, Codec::None);
        let reqs: Vec<_> = [0, 1, 2, 3, 4, 5]
            .iter()
            .map(|&chunk| ChunkRequest { chunk, part: None })
            .collect();
        let mut stats = IoStats::default();
        let got = r.fetch(&reqs, false, &mut stats).unwrap();
        assert_eq!(got, recs);
        // two shards: 0..4 and 4..6
        assert_eq!(stats.read_ops, 2);
        assert_eq!(stats.chunk_decodes, 6);

        let mut stats = IoStats::default();
        let reqs = [
            ChunkRequest { chunk: 0, part: Some(2..4) },
            ChunkRequest { chunk: 1, part: Some(0..1) },
            ChunkRequest { chunk: 3, part: None },
        ];
        let got = r.fetch(&reqs, false, &mut stats).unwrap();
        assert_eq!(got, vec![vec![0, 0], vec![1], vec![3; 4]]);
        assert_eq!(stats.read_ops, 2);
        assert_eq!(stats.bytes_read, 7);
    }

    #[test]
    fn truncated_shard_detected() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<Vec<u8>> = (0..3u8).map(|i| vec![i; 10]).collect();
        write_set(dir.path(), 4, &recs, Codec::Deflate);
        let path = shard_path(dir.path(), 0);
        let len = std::fs::metadata(&path).unwrap().len();
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 3).unwrap();
        let r = ShardSetReader::new(dir.path(), 4, 3, Codec::Deflate);
        let err = r
            .fetch(&[ChunkRequest { chunk: 0, part: None }], false, &mut IoStats::default())
            .unwrap_err();
        assert!(matches!(err, StoreError::CorruptShard { shard: 0, .. }), "{err}");
    }

    #[test]
    fn resume_discards_tail() {
        let dir = tempfile::tempdir().unwrap();
        write_set(dir.path(), 4, &[vec![1; 3], vec![2; 3], vec![3; 3]], Codec::None);
        let mut w = ShardSetWriter::resume(dir.path(), 4, Codec::None, 2).unwrap();
        w.push_chunk(&[9; 5]).unwrap();
        w.push_chunk(&[8; 1]).unwrap();
        w.push_chunk(&[7; 2]).unwrap();
        w.finish().unwrap();
        let r = ShardSetReader::new(dir.path(), 4, 5, Codec::None);
        let reqs: Vec<_> = (0..5).map(|chunk| ChunkRequest { chunk, part: None }).collect();
        let got = r.fetch(&reqs, false, &mut IoStats::default()).unwrap();
        assert_eq!(got, vec![vec![1; 3], vec![2; 3], vec![9; 5], vec![8], vec![7; 2]]);
    }
}
