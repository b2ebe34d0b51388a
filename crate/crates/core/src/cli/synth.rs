use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::rng::{self, Purpose};
use crate::store::{
    create_store, CsrBlock, DenseBlock, Layout, RowBlock, Store, StoreOptions, ValueDtype, Values,
};

use super::CliError;

/// Rows generated per random stream; fixed so the output does not depend on
/// the chunking.
const SYNTH_ROWS: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n_obs: u64,
    pub n_var: u64,
    pub layout: Layout,
    /// Target fraction of nonzeros per CSR row, identity column included.
    pub density: f64,
    pub seed: u64,
    pub disk_budget_bytes: u64,
}

/// Column 0 holds the global row index; the other columns are seeded noise
/// (uniform in (0, 1] for floats, small positive integers otherwise).
pub fn synth_store(out: &Path, spec: &SynthSpec, options: &StoreOptions) -> Result<Store, CliError> {
    let dtype = options.value_dtype;
    if spec.n_var == 0 {
        return Err(CliError::Usage("n_var must be >= 1".into()));
    }
    if spec.n_obs > dtype.exact_integer_limit() {
        return Err(CliError::Usage(format!(
            "{} cannot hold row indices up to {}; use a wider --dtype",
            dtype.name(),
            spec.n_obs - 1
        )));
    }
    let p_other = match spec.layout {
        Layout::Dense => 1.0,
        Layout::Csr => {
            if !(spec.density > 0.0 && spec.density <= 1.0) {
                return Err(CliError::Usage(format!("density {} is outside (0, 1]", spec.density)));
            }
            if spec.n_var == 1 {
                0.0
            } else {
                ((spec.density * spec.n_var as f64 - 1.0) / (spec.n_var - 1) as f64).clamp(0.0, 1.0)
            }
        }
    };
    let estimate = estimate_bytes(spec, dtype, p_other);
    if estimate > spec.disk_budget_bytes as f64 {
        return Err(CliError::Usage(format!(
            "estimated size {:.0} bytes exceeds the disk budget of {} bytes",
            estimate, spec.disk_budget_bytes
        )));
    }

    let mut opts = options.clone();
    opts.layout = spec.layout;
    opts.var_names = std::iter::once("obs_index".to_string())
        .chain((1..spec.n_var).map(|j| format!("v{j}")))
        .collect();
    let mut w = create_store(out, &opts)?;
    let mut start = 0;
    let mut k = 0;
    while start < spec.n_obs {
        let end = (start + SYNTH_ROWS).min(spec.n_obs);
        let block = match spec.layout {
            Layout::Dense => dense_rows(start..end, spec.n_var as usize, dtype, spec.seed, k),
            Layout::Csr => csr_rows(start..end, spec.n_var as usize, dtype, p_other, spec.seed, k),
        };
        w.append_rows(&block)?;
        start = end;
        k += 1;
    }
    Ok(w.finish()?)
}

fn estimate_bytes(spec: &SynthSpec, dtype: ValueDtype, p_other: f64) -> f64 {
    let n = spec.n_obs as f64;
    match spec.layout {
        Layout::Dense => n * spec.n_var as f64 * dtype.size() as f64,
        Layout::Csr => {
            let nnz = n * (1.0 + p_other * (spec.n_var - 1) as f64);
            nnz * (dtype.size() + 4) as f64 + n * 8.0
        }
    }
}

fn noise(r: &mut rng::Rng, values: &mut Values) {
    match values {
        Values::F32(v) => v.push(1.0 - r.random::<f32>()),
        Values::F64(v) => v.push(1.0 - r.random::<f64>()),
        Values::I32(v) => v.push(r.random_range(1..=1000)),
        Values::U8(v) => v.push(r.random_range(1..=255)),
    }
}

fn dense_rows(rows: std::ops::Range<u64>, n_var: usize, dtype: ValueDtype, seed: u64, k: u64) -> RowBlock {
    let mut r = rng::stream(seed, Purpose::Synth, k);
    let n = (rows.end - rows.start) as usize;
    let mut values = Values::with_capacity(dtype, n * n_var);
    for i in rows {
        values.push_f64(i as f64);
        for _ in 1..n_var {
            noise(&mut r, &mut values);
        }
    }
    DenseBlock::new(n, n_var, values).unwrap().into()
}

fn csr_rows(
    rows: std::ops::Range<u64>,
    n_var: usize,
    dtype: ValueDtype,
    p: f64,
    seed: u64,
    k: u64,
) -> RowBlock {
    let mut r = rng::stream(seed, Purpose::Synth, k);
    let n = (rows.end - rows.start) as usize;
    let gap = (p > 0.0 && p < 1.0).then(|| Geometric::new(p).unwrap());
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0u64);
    let mut indices = Vec::new();
    let mut data = Values::empty(dtype);
    for i in rows {
        if i != 0 {
            indices.push(0);
            data.push_f64(i as f64);
        }
        if p > 0.0 {
            let mut col = 1usize;
            loop {
                if let Some(g) = &gap {
                    col = col.saturating_add(g.sample(&mut r) as usize);
                }
                if col >= n_var {
                    break;
                }
                indices.push(col as u64);
                noise(&mut r, &mut data);
                col += 1;
            }
        }
        indptr.push(indices.len() as u64);
    }
    CsrBlock::new(n, n_var, indptr, indices, data).unwrap().into()
}
