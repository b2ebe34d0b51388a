//! In-memory row blocks: dense row-major and CSR.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::values::{ValueDtype, Values};
use super::StoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Dense,
    Csr,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Layout::Dense),
            "csr" => Ok(Layout::Csr),
            other => Err(format!("unknown layout `{other}`")),
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::Dense => "dense",
            Layout::Csr => "csr",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlock {
    pub n_rows: usize,
    pub n_var: usize,
    /// Row-major, `n_rows * n_var` long.
    pub values: Values,
}

impl DenseBlock {
    pub fn new(n_rows: usize, n_var: usize, values: Values) -> Result<Self, StoreError> {
        let block = DenseBlock { n_rows, n_var, values };
        block.validate()?;
        Ok(block)
    }

    pub fn zeros(dtype: ValueDtype, n_rows: usize, n_var: usize) -> Self {
        DenseBlock {
            n_rows,
            n_var,
            values: Values::zeros(dtype, n_rows * n_var),
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.values.len() != self.n_rows * self.n_var {
            return Err(StoreError::InvalidBlock(format!(
                "dense block has {} values, expected {} x {}",
                self.values.len(),
                self.n_rows,
                self.n_var
            )));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values.get_f64(row * self.n_var + col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrBlock {
    pub n_rows: usize,
    pub n_var: usize,
    pub indptr: Vec<u64>,
    pub indices: Vec<u64>,
    pub data: Values,
}

impl CsrBlock {
    pub fn new(
        n_rows: usize,
        n_var: usize,
        indptr: Vec<u64>,
        indices: Vec<u64>,
        data: Values,
    ) -> Result<Self, StoreError> {
        let block = CsrBlock {
            n_rows,
            n_var,
            indptr,
            indices,
            data,
        };
        block.validate()?;
        Ok(block)
    }

    pub fn empty(dtype: ValueDtype, n_var: usize) -> Self {
        CsrBlock {
            n_rows: 0,
            n_var,
            indptr: vec![0],
            indices: Vec::new(),
            data: Values::empty(dtype),
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row_range(&self, row: usize) -> Range<usize> {
        self.indptr[row] as usize..self.indptr[row + 1] as usize
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |msg: String| Err(StoreError::InvalidBlock(msg));
        if self.indptr.len() != self.n_rows + 1 {
            return bad(format!(
                "indptr has length {}, expected {}",
                self.indptr.len(),
                self.n_rows + 1
            ));
        }
        if self.indptr[0] != 0 {
            return bad(format!("indptr[0] is {}, expected 0", self.indptr[0]));
        }
        let nnz = *self.indptr.last().unwrap() as usize;
        if nnz != self.indices.len() || nnz != self.data.len() {
            return bad(format!(
                "indptr ends at {nnz} but there are {} indices and {} values",
                self.indices.len(),
                self.data.len()
            ));
        }
        for row in 0..self.n_rows {
            let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
            if hi < lo {
                return bad(format!("indptr decreases at row {row}"));
            }
            let cols = &self.indices[lo as usize..hi as usize];
            for (k, &c) in cols.iter().enumerate() {
                if c as usize >= self.n_var {
                    return bad(format!(
                        "row {row} has column index {c} >= n_var {}",
                        self.n_var
                    ));
                }
                if k > 0 && cols[k - 1] >= c {
                    return bad(format!("row {row} column indices are not strictly increasing"));
                }
            }
        }
        Ok(())
    }

    /// Appends rows `rows` of `other`, rebasing their indptr.
    pub fn extend_rows(&mut self, other: &CsrBlock, rows: Range<usize>) {
        if rows.is_empty() {
            return;
        }
        let lo = other.indptr[rows.start] as usize;
        let hi = other.indptr[rows.end] as usize;
        let base = *self.indptr.last().unwrap();
        self.indptr.extend(
            other.indptr[rows.start + 1..=rows.end]
                .iter()
                .map(|&p| p - lo as u64 + base),
        );
        self.indices.extend_from_slice(&other.indices[lo..hi]);
        self.data.extend_from(&other.data, lo..hi);
        self.n_rows += rows.len();
    }
}

/// Densifies a CSR block.
pub fn to_dense(csr: &CsrBlock) -> DenseBlock {
    let mut out = DenseBlock::zeros(csr.data.dtype(), csr.n_rows, csr.n_var);
    for row in 0..csr.n_rows {
        for k in csr.row_range(row) {
            let dst = row * csr.n_var + csr.indices[k] as usize;
            out.values.copy_from(dst, &csr.data, k, 1);
        }
    }
    out
}

/// Sparsifies a dense block, dropping exact zeros.
pub fn to_csr(dense: &DenseBlock) -> CsrBlock {
    let mut out = CsrBlock::empty(dense.values.dtype(), dense.n_var);
    for row in 0..dense.n_rows {
        let base = row * dense.n_var;
        for col in 0..dense.n_var {
            if !dense.values.is_zero(base + col) {
                out.indices.push(col as u64);
                out.data.extend_from(&dense.values, base + col..base + col + 1);
            }
        }
        out.indptr.push(out.indices.len() as u64);
    }
    out.n_rows = dense.n_rows;
    out
}

/// A block of rows in either layout.
#[derive(Clone, Debug, PartialEq)]
pub enum RowBlock {
    Dense(DenseBlock),
    Csr(CsrBlock),
}

impl From<DenseBlock> for RowBlock {
    fn from(b: DenseBlock) -> Self {
        RowBlock::Dense(b)
    }
}

impl From<CsrBlock> for RowBlock {
    fn from(b: CsrBlock) -> Self {
        RowBlock::Csr(b)
    }
}

impl RowBlock {
    pub fn empty(layout: Layout, dtype: ValueDtype, n_var: usize) -> Self {
        match layout {
            Layout::Dense => RowBlock::Dense(DenseBlock::zeros(dtype, 0, n_var)),
            Layout::Csr => RowBlock::Csr(CsrBlock::empty(dtype, n_var)),
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            RowBlock::Dense(_) => Layout::Dense,
            RowBlock::Csr(_) => Layout::Csr,
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            RowBlock::Dense(b) => b.n_rows,
            RowBlock::Csr(b) => b.n_rows,
        }
    }

    pub fn n_var(&self) -> usize {
        match self {
            RowBlock::Dense(b) => b.n_var,
            RowBlock::Csr(b) => b.n_var,
        }
    }

    pub fn dtype(&self) -> ValueDtype {
        match self {
            RowBlock::Dense(b) => b.values.dtype(),
            RowBlock::Csr(b) => b.data.dtype(),
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        match self {
            RowBlock::Dense(b) => b.validate(),
            RowBlock::Csr(b) => b.validate(),
        }
    }

    /// Appends rows `rows` of `other`. Panics if layouts, widths or dtypes differ.
    pub fn extend_rows(&mut self, other: &RowBlock, rows: Range<usize>) {
        match (self, other) {
            (RowBlock::Dense(a), RowBlock::Dense(b)) => {
                assert_eq!(a.n_var, b.n_var);
                a.values
                    .extend_from(&b.values, rows.start * b.n_var..rows.end * b.n_var);
                a.n_rows += rows.len();
            }
            (RowBlock::Csr(a), RowBlock::Csr(b)) => {
                assert_eq!(a.n_var, b.n_var);
                a.extend_rows(b, rows);
            }
            _ => panic!("layout mismatch"),
        }
    }

    pub fn append(&mut self, other: &RowBlock) {
        self.extend_rows(other, 0..other.n_rows())
    }

    pub fn slice_rows(&self, rows: Range<usize>) -> RowBlock {
        let mut out = RowBlock::empty(self.layout(), self.dtype(), self.n_var());
        out.extend_rows(self, rows);
        out
    }

    /// Builds a block from rows of `self` in the given order.
    pub fn gather(&self, rows: &[usize]) -> RowBlock {
        let mut out = RowBlock::empty(self.layout(), self.dtype(), self.n_var());
        for &r in rows {
            out.extend_rows(self, r..r + 1);
        }
        out
    }

    pub fn to_dense(&self) -> DenseBlock {
        match self {
            RowBlock::Dense(b) => b.clone(),
            RowBlock::Csr(b) => to_dense(b),
        }
    }

    /// Value at (row, col); absent CSR entries read as zero.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self {
            RowBlock::Dense(b) => b.get(row, col),
            RowBlock::Csr(b) => {
                let r = b.row_range(row);
                match b.indices[r.clone()].binary_search(&(col as u64)) {
                    Ok(k) => b.data.get_f64(r.start + k),
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Bitwise equality of row `i` of `self` and row `j` of `other`.
    pub fn row_eq(&self, i: usize, other: &RowBlock, j: usize) -> bool {
        match (self, other) {
            (RowBlock::Dense(a), RowBlock::Dense(b)) => {
                a.n_var == b.n_var && a.values.range_eq(i * a.n_var, &b.values, j * b.n_var, a.n_var)
            }
            (RowBlock::Csr(a), RowBlock::Csr(b)) => {
                let (ra, rb) = (a.row_range(i), b.row_range(j));
                a.n_var == b.n_var
                    && ra.len() == rb.len()
                    && a.indices[ra.clone()] == b.indices[rb.clone()]
                    && a.data.range_eq(ra.start, &b.data, rb.start, ra.len())
            }
            _ => false,
        }
    }

    /// Concatenates blocks of identical layout/dtype/width.
    pub fn concat<'a>(
        layout: Layout,
        dtype: ValueDtype,
        n_var: usize,
        parts: impl IntoIterator<Item = &'a RowBlock>,
    ) -> RowBlock {
        let mut out = RowBlock::empty(layout, dtype, n_var);
        for p in parts {
            out.append(p);
        }
        out
    }
}
