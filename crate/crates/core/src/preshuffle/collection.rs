use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ShuffleError;
use crate::store::{CsrBlock, DenseBlock, Layout, RowBlock, RowRange, Store, ValueDtype};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinMode {
    Inner,
    Outer,
}

impl std::str::FromStr for JoinMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inner" => Ok(JoinMode::Inner),
            "outer" => Ok(JoinMode::Outer),
            other => Err(format!("unknown join mode `{other}`")),
        }
    }
}

/// One member store and where its rows sit in the concatenation.
#[derive(Debug)]
pub struct Member {
    pub id: u32,
    pub store: Arc<Store>,
    pub row_offset: u64,
    /// Source column -> unified column.
    column_map: Vec<Option<usize>>,
    identity: bool,
}

/// Lazily concatenated stores sharing layout and value dtype.
#[derive(Debug)]
pub struct DatasetCollection {
    join_mode: JoinMode,
    members: Vec<Member>,
    unified_var_names: Vec<String>,
    warnings: Vec<String>,
}

impl DatasetCollection {
    pub fn new(join_mode: JoinMode) -> Self {
        DatasetCollection {
            join_mode,
            members: Vec::new(),
            unified_var_names: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Builds a collection from stores in order.
    pub fn from_stores(
        join_mode: JoinMode,
        stores: impl IntoIterator<Item = Arc<Store>>,
    ) -> Result<Self, ShuffleError> {
        let mut c = Self::new(join_mode);
        for s in stores {
            c.add_dataset(s)?;
        }
        Ok(c)
    }

    pub fn join_mode(&self) -> JoinMode {
        self.join_mode
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn unified_var_names(&self) -> &[String] {
        &self.unified_var_names
    }

    /// One entry per column present in some but not all members.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn total_rows(&self) -> u64 {
        self.members.iter().map(|m| m.store.n_obs()).sum()
    }

    pub fn layout(&self) -> Option<Layout> {
        self.members.first().map(|m| m.store.manifest().layout)
    }

    pub fn value_dtype(&self) -> Option<ValueDtype> {
        self.members.first().map(|m| m.store.manifest().value_dtype)
    }

    /// Adds a store, returning its dataset id.
    pub fn add_dataset(&mut self, store: Arc<Store>) -> Result<u32, ShuffleError> {
        let m = store.manifest();
        if let Some(first) = self.members.first() {
            let f = first.store.manifest();
            if f.layout != m.layout || f.value_dtype != m.value_dtype {
                return Err(ShuffleError::Incompatible(format!(
                    "{} store of {} values cannot join a collection of {} {} stores",
                    m.layout,
                    m.value_dtype.name(),
                    f.layout,
                    f.value_dtype.name()
                )));
            }
        }
        let mut seen = HashSet::new();
        if let Some(dup) = m.var_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(ShuffleError::Incompatible(format!(
                "store {} has duplicate column `{dup}`",
                store.root().display()
            )));
        }
        let id = self.members.len() as u32;
        let row_offset = self.total_rows();
        self.members.push(Member {
            id,
            store,
            row_offset,
            column_map: Vec::new(),
            identity: false,
        });
        self.rebuild_columns();
        Ok(id)
    }

    fn rebuild_columns(&mut self) {
        let n = self.members.len();
        let mut order: Vec<&str> = Vec::new();
        let mut count: HashMap<&str, usize> = HashMap::new();
        for m in &self.members {
            for name in &m.store.manifest().var_names {
                let c = count.entry(name).or_insert(0);
                if *c == 0 {
                    order.push(name);
                }
                *c += 1;
            }
        }
        let unified: Vec<String> = match self.join_mode {
            JoinMode::Outer => order.iter().map(|s| s.to_string()).collect(),
            JoinMode::Inner => self.members[0]
                .store
                .manifest()
                .var_names
                .iter()
                .filter(|v| count[v.as_str()] == n)
                .cloned()
                .collect(),
        };
        let action = match self.join_mode {
            JoinMode::Outer => "filled with zeros where absent",
            JoinMode::Inner => "dropped",
        };
        self.warnings = order
            .iter()
            .filter(|v| count[**v] < n)
            .map(|v| {
                let holders: Vec<String> = self
                    .members
                    .iter()
                    .filter(|m| m.store.manifest().var_names.iter().any(|x| x == v))
                    .map(|m| m.id.to_string())
                    .collect();
                format!(
                    "column `{v}` is present in only {} of {n} datasets (ids {}); {action}",
                    count[*v],
                    holders.join(",")
                )
            })
            .collect();
        let position: HashMap<&str, usize> =
            unified.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        for m in &mut self.members {
            m.column_map = m
                .store
                .manifest()
                .var_names
                .iter()
                .map(|v| position.get(v.as_str()).copied())
                .collect();
            m.identity = m.column_map.len() == unified.len()
                && m.column_map.iter().enumerate().all(|(i, c)| *c == Some(i));
        }
        self.unified_var_names = unified;
    }

    /// Maps a global row to `(member index, local row)`.
    pub fn locate(&self, row: u64) -> (usize, u64) {
        let idx = self.members.partition_point(|m| m.row_offset <= row) - 1;
        (idx, row - self.members[idx].row_offset)
    }

    /// Splits a global range into per-member local ranges, in order.
    pub fn split_range(&self, range: RowRange) -> Vec<(usize, RowRange)> {
        let mut out = Vec::new();
        let mut row = range.start;
        while row < range.end {
            let (idx, local) = self.locate(row);
            let m = &self.members[idx];
            let stop = range.end.min(m.row_offset + m.store.n_obs());
            out.push((idx, RowRange::new(local, local + (stop - row))));
            row = stop;
        }
        out
    }

    /// Rewrites a block read from member `idx` into the unified column space.
    pub fn reproject(&self, idx: usize, block: RowBlock) -> RowBlock {
        let m = &self.members[idx];
        if m.identity {
            return block;
        }
        let width = self.unified_var_names.len();
        match block {
            RowBlock::Dense(b) => {
                let mut out = DenseBlock::zeros(b.values.dtype(), b.n_rows, width);
                for row in 0..b.n_rows {
                    for (src, dst) in m.column_map.iter().enumerate() {
                        if let Some(dst) = dst {
                            out.values
                                .copy_from(row * width + dst, &b.values, row * b.n_var + src, 1);
                        }
                    }
                }
                RowBlock::Dense(out)
            }
            RowBlock::Csr(b) => {
                let mut out = CsrBlock::empty(b.data.dtype(), width);
                let mut entries: Vec<(u64, usize)> = Vec::new();
                for row in 0..b.n_rows {
                    entries.clear();
                    for k in b.row_range(row) {
                        if let Some(dst) = m.column_map[b.indices[k] as usize] {
                            entries.push((dst as u64, k));
                        }
                    }
                    entries.sort_unstable();
                    for &(col, k) in &entries {
                        out.indices.push(col);
                        out.data.extend_from(&b.data, k..k + 1);
                    }
                    out.indptr.push(out.indices.len() as u64);
                }
                out.n_rows = b.n_rows;
                RowBlock::Csr(out)
            }
        }
    }

    /// An empty block in the unified column space.
    pub fn empty_block(&self) -> RowBlock {
        RowBlock::empty(
            self.layout().unwrap_or(Layout::Dense),
            self.value_dtype().unwrap_or(ValueDtype::F32),
            self.unified_var_names.len(),
        )
    }
}
