//! Chunk record encoding (before the codec is applied).
//!
//! Dense: little-endian row-major values.
//! CSR: `n_rows: u32`, `nnz: u64`, then local indptr (`n_rows + 1`), indices
//! and data, each little-endian in the manifest dtypes.

use std::ops::Range;

use super::block::{CsrBlock, DenseBlock, RowBlock};
use super::manifest::{IndexDtype, StoreManifest};
use super::values::Values;
use super::StoreError;

const CSR_HEADER: usize = 12;

fn push_index(out: &mut Vec<u8>, dtype: IndexDtype, x: u64) {
    match dtype {
        IndexDtype::U32 => out.extend_from_slice(&(x as u32).to_le_bytes()),
        IndexDtype::U64 => out.extend_from_slice(&x.to_le_bytes()),
    }
}

fn read_indices(bytes: &[u8], dtype: IndexDtype) -> Vec<u64> {
    match dtype {
        IndexDtype::U32 => bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as u64)
            .collect(),
        IndexDtype::U64 => bytes
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    }
}

/// Encodes rows `rows` of `block` as one chunk record.
pub fn encode_rows(
    manifest: &StoreManifest,
    block: &RowBlock,
    rows: Range<usize>,
) -> Result<Vec<u8>, StoreError> {
    let mut out = Vec::new();
    match block {
        RowBlock::Dense(b) => {
            b.values
                .write_range_le(rows.start * b.n_var..rows.end * b.n_var, &mut out);
        }
        RowBlock::Csr(b) => {
            let index_dtype = manifest.index_dtype.expect("csr manifest has index dtype");
            let lo = b.indptr[rows.start];
            let hi = b.indptr[rows.end];
            let nnz = hi - lo;
            if index_dtype == IndexDtype::U32 && nnz > u32::MAX as u64 {
                return Err(StoreError::InvalidBlock(format!(
                    "chunk holds {nnz} nonzeros, too many for u32 indices"
                )));
            }
            let isz = index_dtype.size();
            out.reserve(
                CSR_HEADER
                    + (rows.len() + 1 + nnz as usize) * isz
                    + nnz as usize * b.data.dtype().size(),
            );
            out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
            out.extend_from_slice(&nnz.to_le_bytes());
            for &p in &b.indptr[rows.start..=rows.end] {
                push_index(&mut out, index_dtype, p - lo);
            }
            for &c in &b.indices[lo as usize..hi as usize] {
                push_index(&mut out, index_dtype, c);
            }
            b.data.write_range_le(lo as usize..hi as usize, &mut out);
        }
    }
    Ok(out)
}

/// Decodes a whole chunk record holding `n_rows` rows.
pub fn decode_chunk(
    manifest: &StoreManifest,
    chunk: u64,
    n_rows: usize,
    raw: &[u8],
) -> Result<RowBlock, StoreError> {
    let corrupt = |reason: String| StoreError::CorruptChunk { chunk, reason };
    let n_var = manifest.n_var as usize;
    let vsz = manifest.value_dtype.size();
    match manifest.layout {
        super::Layout::Dense => {
            let expected = n_rows * n_var * vsz;
            if raw.len() != expected {
                return Err(corrupt(format!(
                    "record is {} bytes, expected {expected}",
                    raw.len()
                )));
            }
            Ok(RowBlock::Dense(DenseBlock {
                n_rows,
                n_var,
                values: Values::read_le(manifest.value_dtype, raw),
            }))
        }
        super::Layout::Csr => {
            let index_dtype = manifest.index_dtype.expect("csr manifest has index dtype");
            let isz = index_dtype.size();
            if raw.len() < CSR_HEADER {
                return Err(corrupt(format!("record is {} bytes, shorter than its header", raw.len())));
            }
            let rows = u32::from_le_bytes(raw[0..4].try_into().unwrap()) as usize;
            let nnz = u64::from_le_bytes(raw[4..12].try_into().unwrap());
            if rows != n_rows {
                return Err(corrupt(format!("header says {rows} rows, expected {n_rows}")));
            }
            let nnz_usize = usize::try_from(nnz).map_err(|_| corrupt("nnz overflow".into()))?;
            let expected = (CSR_HEADER as u128)
                + ((rows + 1) as u128 + nnz as u128) * isz as u128
                + nnz as u128 * vsz as u128;
            if raw.len() as u128 != expected {
                return Err(corrupt(format!(
                    "record is {} bytes, expected {expected} for {rows} rows and {nnz} nonzeros",
                    raw.len()
                )));
            }
            let mut at = CSR_HEADER;
            let indptr = read_indices(&raw[at..at + (rows + 1) * isz], index_dtype);
            at += (rows + 1) * isz;
            let indices = read_indices(&raw[at..at + nnz_usize * isz], index_dtype);
            at += nnz_usize * isz;
            let data = Values::read_le(manifest.value_dtype, &raw[at..]);
            let block = CsrBlock {
                n_rows: rows,
                n_var,
                indptr,
                indices,
                data,
            };
            block.validate().map_err(|e| corrupt(e.to_string()))?;
            Ok(RowBlock::Csr(block))
        }
    }
}
