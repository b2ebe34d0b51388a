use std::path::Path;

use serde::{Deserialize, Serialize};

use super::block::Layout;
use super::values::ValueDtype;
use super::StoreError;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexDtype {
    U32,
    U64,
}

impl IndexDtype {
    pub fn size(self) -> usize {
        match self {
            IndexDtype::U32 => 4,
            IndexDtype::U64 => 8,
        }
    }
}

impl std::str::FromStr for IndexDtype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "u32" => Ok(IndexDtype::U32),
            "u64" => Ok(IndexDtype::U64),
            other => Err(format!("unknown index dtype `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    None,
    Deflate,
}

impl std::str::FromStr for Codec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Codec::None),
            "deflate" => Ok(Codec::Deflate),
            other => Err(format!("unknown codec `{other}`")),
        }
    }
}

/// On-disk description of a chunked, sharded observation matrix.
///
/// Serialized as `manifest.json`; field order here is the key order on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreManifest {
    pub format_version: u32,
    pub layout: Layout,
    pub n_obs: u64,
    pub n_var: u64,
    pub value_dtype: ValueDtype,
    /// Present for CSR stores only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_dtype: Option<IndexDtype>,
    pub chunk_rows: u64,
    pub chunks_per_shard: u64,
    pub codec: Codec,
    pub var_names: Vec<String>,
    pub has_provenance: bool,
}

impl StoreManifest {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: String| Err(StoreError::InvalidManifest(m));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.var_names.len() as u64 != self.n_var {
            return bad(format!(
                "{} var_names for n_var = {}",
                self.var_names.len(),
                self.n_var
            ));
        }
        if self.chunk_rows == 0 || self.chunks_per_shard == 0 {
            return bad("chunk_rows and chunks_per_shard must be >= 1".into());
        }
        if self.chunk_rows > u32::MAX as u64 {
            return bad("chunk_rows must fit in 32 bits".into());
        }
        match (self.layout, self.index_dtype) {
            (Layout::Dense, Some(_)) => return bad("index_dtype is only valid for csr".into()),
            (Layout::Csr, None) => return bad("csr store requires index_dtype".into()),
            (Layout::Csr, Some(IndexDtype::U32)) if self.n_var > u32::MAX as u64 + 1 => {
                return bad("n_var too large for u32 indices".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn chunk_count(&self) -> u64 {
        self.n_obs.div_ceil(self.chunk_rows)
    }

    pub fn shard_count(&self) -> u64 {
        self.chunk_count().div_ceil(self.chunks_per_shard)
    }

    pub fn shard_capacity_rows(&self) -> u64 {
        self.chunk_rows * self.chunks_per_shard
    }

    /// Global row range covered by `chunk`.
    pub fn chunk_rows_range(&self, chunk: u64) -> std::ops::Range<u64> {
        let start = chunk * self.chunk_rows;
        start..(start + self.chunk_rows).min(self.n_obs)
    }

    /// Byte length of one dense row.
    pub fn dense_row_bytes(&self) -> usize {
        self.n_var as usize * self.value_dtype.size()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, StoreError> {
        let m: StoreManifest =
            serde_json::from_str(s).map_err(|e| StoreError::InvalidManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(root: &Path) -> Result<Self, StoreError> {
        let path = root.join(MANIFEST_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(root.to_path_buf()))
            }
            Err(e) => return Err(StoreError::io(&path, e)),
        };
        Self::from_json(&text)
    }

    /// Atomically replaces `<root>/manifest.json`.
    pub fn write(&self, root: &Path) -> Result<(), StoreError> {
        super::write_atomic(&root.join(MANIFEST_FILE), self.to_json().as_bytes())
    }
}
