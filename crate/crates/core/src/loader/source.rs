use crate::store::{IoStats, Layout, RowBlock, RowRange, Store, StoreError, ValueDtype};

/// Anything the loader can fetch contiguous row ranges from.
pub trait RowSource: Send + Sync {
    fn n_obs(&self) -> u64;
    fn n_var(&self) -> usize;
    fn layout(&self) -> Layout;
    fn value_dtype(&self) -> ValueDtype;
    fn read_range(&self, range: RowRange, cache_bypass: bool) -> Result<(RowBlock, IoStats), StoreError>;
}

impl RowSource for Store {
    fn n_obs(&self) -> u64 {
        Store::n_obs(self)
    }

    fn n_var(&self) -> usize {
        Store::n_var(self)
    }

    fn layout(&self) -> Layout {
        self.manifest().layout
    }

    fn value_dtype(&self) -> ValueDtype {
        self.manifest().value_dtype
    }

    fn read_range(&self, range: RowRange, cache_bypass: bool) -> Result<(RowBlock, IoStats), StoreError> {
        self.read_rows(&[range], cache_bypass)
    }
}

/// Rows held in memory; reads cost no I/O.
#[derive(Clone, Debug)]
pub struct MemorySource {
    rows: RowBlock,
}

impl MemorySource {
    pub fn new(rows: RowBlock) -> Self {
        MemorySource { rows }
    }
}

impl RowSource for MemorySource {
    fn n_obs(&self) -> u64 {
        self.rows.n_rows() as u64
    }

    fn n_var(&self) -> usize {
        self.rows.n_var()
    }

    fn layout(&self) -> Layout {
        self.rows.layout()
    }

    fn value_dtype(&self) -> ValueDtype {
        self.rows.dtype()
    }

    fn read_range(&self, range: RowRange, _cache_bypass: bool) -> Result<(RowBlock, IoStats), StoreError> {
        let n = self.n_obs();
        if range.start > range.end || range.end > n {
            return Err(StoreError::OutOfBounds {
                start: range.start,
                end: range.end,
                n_obs: n,
            });
        }
        let block = self.rows.slice_rows(range.start as usize..range.end as usize);
        Ok((block, IoStats::default()))
    }
}
