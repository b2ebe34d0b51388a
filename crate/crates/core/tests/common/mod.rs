#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use obsbatch::store::{
    create_store, to_csr, Codec, DenseBlock, Layout, RowBlock, Store, StoreOptions, ValueDtype,
    Values,
};

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Dense f32 rows where every entry of row `i` is `base + i + 1` plus the column index / 1000.
pub fn tagged_rows(base: u64, n: usize, n_var: usize) -> DenseBlock {
    let mut v = Vec::with_capacity(n * n_var);
    for i in 0..n {
        for j in 0..n_var {
            v.push((base + i as u64 + 1) as f32 + j as f32 / 1000.0);
        }
    }
    DenseBlock::new(n, n_var, Values::F32(v)).unwrap()
}

/// Store whose row `i` has `i` in every column.
pub fn identity_store(path: &Path, n: usize, n_var: usize, chunk_rows: u64, cps: u64) -> Arc<Store> {
    let opts = StoreOptions::new(Layout::Dense, ValueDtype::F32, names("v", n_var))
        .chunking(chunk_rows, cps);
    let mut w = create_store(path, &opts).unwrap();
    let mut start = 0;
    while start < n {
        let len = (n - start).min(4096);
        let mut v = Vec::with_capacity(len * n_var);
        for i in start..start + len {
            v.extend(std::iter::repeat_n(i as f32, n_var));
        }
        w.append_rows(&DenseBlock::new(len, n_var, Values::F32(v)).unwrap().into())
            .unwrap();
        start += len;
    }
    Arc::new(w.finish().unwrap())
}

pub fn store_from_block(
    path: &Path,
    block: &DenseBlock,
    var_names: Vec<String>,
    layout: Layout,
    chunk_rows: u64,
    cps: u64,
    codec: Codec,
) -> Arc<Store> {
    let opts = StoreOptions::new(layout, block.values.dtype(), var_names)
        .chunking(chunk_rows, cps)
        .codec(codec);
    let mut w = create_store(path, &opts).unwrap();
    let rb: RowBlock = match layout {
        Layout::Dense => block.clone().into(),
        Layout::Csr => to_csr(block).into(),
    };
    w.append_rows(&rb).unwrap();
    Arc::new(w.finish().unwrap())
}

/// Every file under `root`, relative path -> bytes.
pub fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
