use std::io::BufRead;
use std::path::Path;

use crate::store::{
    create_store, CsrBlock, DenseBlock, Layout, Store, StoreError, StoreOptions, Values,
};

use super::CliError;

const APPEND_ROWS: usize = 4096;

/// Reads a CSV whose header names the columns and whose rows are numbers
/// into a new dense store.
pub fn ingest_csv(input: &Path, out: &Path, options: &StoreOptions) -> Result<Store, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(input)
        .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let n_var = names.len();
    let mut opts = options.clone();
    opts.layout = Layout::Dense;
    opts.var_names = names;
    let mut w = create_store(out, &opts)?;
    let mut values = Values::with_capacity(opts.value_dtype, APPEND_ROWS * n_var);
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => CliError::Usage(format!(
                "{}: line {}: {len} fields, header has {expected_len}",
                input.display(),
                pos.as_ref().map_or(0, |p| p.line())
            )),
            _ => CliError::Io(format!("{}: {e}", input.display())),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        for field in rec.iter() {
            values
                .push_parsed(field)
                .map_err(|e| CliError::Usage(format!("{}: line {line}: {e}", input.display())))?;
        }
        rows += 1;
        if rows == APPEND_ROWS {
            w.append_rows(&DenseBlock::new(rows, n_var, std::mem::replace(&mut values, Values::with_capacity(opts.value_dtype, APPEND_ROWS * n_var)))?.into())?;
            rows = 0;
        }
    }
    if rows > 0 {
        w.append_rows(&DenseBlock::new(rows, n_var, values)?.into())?;
    }
    Ok(w.finish()?)
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, what: &str, line: usize) -> Result<T, CliError> {
    let s = s.ok_or_else(|| CliError::Usage(format!("line {line}: missing {what}")))?;
    s.parse()
        .map_err(|_| CliError::Usage(format!("line {line}: cannot parse {what} `{s}`")))
}

/// Reads `n_obs n_var` followed by 0-based `row col value` lines into a new
/// CSR store. Entries may come in any order; duplicates are rejected.
pub fn ingest_triplet(input: &Path, out: &Path, options: &StoreOptions) -> Result<Store, CliError> {
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", input.display()));
    let file = std::fs::File::open(input).map_err(io_err)?;
    let mut lines = std::io::BufReader::new(file).lines().enumerate();
    let (n_obs, n_var) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(CliError::Usage(format!("{}: empty triplet file", input.display())));
        };
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        let n_obs: u64 = parse_field(f.next(), "n_obs", i + 1)?;
        let n_var: u64 = parse_field(f.next(), "n_var", i + 1)?;
        break (n_obs, n_var);
    };
    // (row, col, line, value text)
    let mut entries: Vec<(u64, u64, usize, String)> = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(io_err)?;
        let ln = i + 1;
        let mut f = line.split_whitespace();
        let Some(first) = f.next() else { continue };
        let row: u64 = parse_field(Some(first), "row", ln)?;
        let col: u64 = parse_field(f.next(), "col", ln)?;
        let value = f
            .next()
            .ok_or_else(|| CliError::Usage(format!("line {ln}: missing value")))?;
        if f.next().is_some() {
            return Err(CliError::Usage(format!("line {ln}: more than three fields")));
        }
        if row >= n_obs || col >= n_var {
            return Err(CliError::Usage(format!(
                "line {ln}: entry ({row}, {col}) outside a {n_obs} x {n_var} matrix"
            )));
        }
        entries.push((row, col, ln, value.to_string()));
    }
    entries.sort_by_key(|e| (e.0, e.1, e.2));
    for pair in entries.windows(2) {
        if (pair[0].0, pair[0].1) == (pair[1].0, pair[1].1) {
            return Err(CliError::Usage(format!(
                "line {}: duplicate entry ({}, {}) first given on line {}",
                pair[1].2, pair[1].0, pair[1].1, pair[0].2
            )));
        }
    }

    let mut opts = options.clone();
    opts.layout = Layout::Csr;
    if opts.var_names.len() as u64 != n_var {
        opts.var_names = (0..n_var).map(|j| format!("v{j}")).collect();
    }
    let dtype = opts.value_dtype;
    let mut w = create_store(out, &opts)?;
    let mut next = 0usize;
    let mut row = 0u64;
    while row < n_obs {
        let end = (row + APPEND_ROWS as u64).min(n_obs);
        let mut indptr = vec![0u64];
        let mut indices = Vec::new();
        let mut data = Values::empty(dtype);
        for r in row..end {
            while next < entries.len() && entries[next].0 == r {
                let e = &entries[next];
                data.push_parsed(&e.3)
                    .map_err(|msg| CliError::Usage(format!("line {}: {msg}", e.2)))?;
                indices.push(e.1);
                next += 1;
            }
            indptr.push(indices.len() as u64);
        }
        let block = CsrBlock::new((end - row) as usize, n_var as usize, indptr, indices, data)
            .map_err(|e: StoreError| CliError::Usage(e.to_string()))?;
        w.append_rows(&block.into())?;
        row = end;
    }
    Ok(w.finish()?)
}
