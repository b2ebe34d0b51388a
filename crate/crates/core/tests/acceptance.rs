//! Acceptance suite. Every criterion prints one `criterion N: PASS|FAIL`
//! line straight to stdout (bypassing test capture) before asserting.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use obsbatch::loader::{open_epoch, LoaderConfig, MemorySource, MiniBatch, RowSource};
use obsbatch::metrics::{
    randomness_report, run_throughput, same_block_pair_rate, simulate_shuffle_order,
    RandomnessOptions, Strategy,
};
use obsbatch::preshuffle::{
    plan_shuffle, run_shuffle, DatasetCollection, JoinMode, OutputOptions, VerifyOptions,
    verify_shuffle,
};
use obsbatch::store::{
    create_store, open_store, to_csr, Codec, DenseBlock, Layout, RowBlock, RowRange,
    StoreOptions, StoreWriter, ValueDtype, Values,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn random_dense(r: &mut ChaCha8Rng, n: usize, n_var: usize, dtype: ValueDtype, zero_frac: f64) -> DenseBlock {
    let mut v = Values::with_capacity(dtype, n * n_var);
    for _ in 0..n * n_var {
        if r.random_bool(zero_frac) {
            v.push_f64(0.0);
            continue;
        }
        match &mut v {
            Values::F32(x) => x.push(r.random_range(-1e3f32..1e3)),
            Values::F64(x) => x.push(r.random_range(-1e6f64..1e6)),
            Values::I32(x) => x.push(r.random_range(i32::MIN..i32::MAX)),
            Values::U8(x) => x.push(r.random()),
        }
    }
    DenseBlock::new(n, n_var, v).unwrap()
}

fn as_layout(block: &DenseBlock, layout: Layout) -> RowBlock {
    match layout {
        Layout::Dense => block.clone().into(),
        Layout::Csr => to_csr(block).into(),
    }
}

#[test]
fn criterion_1_format_round_trip() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let cases = 220;
    let mut failures = Vec::new();
    for case in 0..cases {
        let layout = *[Layout::Dense, Layout::Csr].choose(&mut r).unwrap();
        let dtype = *[ValueDtype::F32, ValueDtype::F64, ValueDtype::I32, ValueDtype::U8].choose(&mut r).unwrap();
        let codec = *[Codec::None, Codec::Deflate].choose(&mut r).unwrap();
        let chunk_rows = r.random_range(1..=300u64);
        let cps = r.random_range(1..=16u64);
        let n_var = r.random_range(1..=12usize);
        let n_obs = if r.random_bool(0.2) { r.random_range(0..=10_000) } else { r.random_range(0..=1500) };
        let data = random_dense(&mut r, n_obs, n_var, dtype, if layout == Layout::Csr { 0.7 } else { 0.1 });

        // random append sequence, with occasional finish + reopen in between
        let path = dir.path().join(format!("c{case}"));
        let names = common::names("g", n_var);
        let opts = StoreOptions::new(layout, dtype, names)
            .chunking(chunk_rows, cps)
            .codec(codec);
        let mut w = create_store(&path, &opts).unwrap();
        let mut start = 0;
        while start < n_obs {
            let len = r.random_range(0..=(n_obs - start).min(700));
            let part = DenseBlock::new(len, n_var, data.values.slice(start * n_var..(start + len) * n_var)).unwrap();
            w.append_rows(&as_layout(&part, layout)).unwrap();
            start += len;
            if r.random_bool(0.15) {
                w.finish().unwrap();
                w = StoreWriter::open_append(&path).unwrap();
            }
        }
        let store = w.finish().unwrap();
        let reopened = open_store(&path).unwrap();
        let got = reopened.read_all().unwrap();
        let want = as_layout(&data, layout);
        if got != want || store.n_obs() != n_obs as u64 || reopened.manifest() != store.manifest() {
            failures.push(case);
        }
        std::fs::remove_dir_all(&path).unwrap();
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 120.0;
    report(1, pass, &format!("{cases} cases, {} mismatches, {secs:.1}s, limit 120s", failures.len()));
    assert!(pass, "failing cases {failures:?}");
}

fn disjoint_ranges(r: &mut ChaCha8Rng, n: u64) -> Vec<RowRange> {
    let k = r.random_range(1..=8usize).min(n as usize);
    let mut cuts: BTreeSet<u64> = BTreeSet::new();
    while cuts.len() < 2 * k {
        cuts.insert(r.random_range(0..=n));
    }
    let cuts: Vec<u64> = cuts.into_iter().collect();
    let mut ranges: Vec<RowRange> = cuts
        .chunks(2)
        .map(|p| RowRange::new(p[0], p[1]))
        .filter(|x| !x.is_empty())
        .collect();
    if ranges.is_empty() {
        ranges.push(RowRange::new(cuts[0], cuts[0] + 1));
    }
    ranges.shuffle(r);
    ranges
}

#[test]
fn criterion_2_coalesced_reads() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut stores = Vec::new();
    for (k, (layout, codec, chunk_rows, cps)) in [
        (Layout::Dense, Codec::None, 37u64, 4u64),
        (Layout::Dense, Codec::Deflate, 64, 3),
        (Layout::Csr, Codec::None, 50, 5),
        (Layout::Csr, Codec::Deflate, 16, 8),
    ]
    .into_iter()
    .enumerate()
    {
        let data = random_dense(&mut r, 5000, 6, ValueDtype::F32, if layout == Layout::Csr { 0.6 } else { 0.0 });
        let store = common::store_from_block(
            &dir.path().join(format!("s{k}")),
            &data,
            common::names("g", 6),
            layout,
            chunk_rows,
            cps,
            codec,
        );
        stores.push((store, as_layout(&data, layout), chunk_rows));
    }
    let sets = 1200;
    let mut bad = 0;
    for i in 0..sets {
        let (store, full, chunk_rows) = &stores[i % stores.len()];
        let ranges = disjoint_ranges(&mut r, store.n_obs());
        let (got, stats) = store.read_rows(&ranges, false).unwrap();
        // per-row oracle
        let mut want = RowBlock::empty(full.layout(), full.dtype(), full.n_var());
        let mut chunks = HashSet::new();
        for rg in &ranges {
            for row in rg.start..rg.end {
                want.extend_rows(full, row as usize..row as usize + 1);
                chunks.insert(row / chunk_rows);
            }
        }
        if got != want || stats.chunk_decodes != chunks.len() as u64 {
            bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = bad == 0 && secs < 60.0;
    report(2, pass, &format!("{sets} range sets, {bad} failures, {secs:.1}s, limit 60s"));
    assert!(pass);
}

#[test]
fn criterion_3_shuffle_correctness() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let pool: Vec<String> = common::names("gene", 10);
    let cases = 100;
    let mut failures = Vec::new();
    let mut max_peak_ratio: f64 = 0.0;
    let mut total_rows_all = 0u64;
    for case in 0..cases {
        let layout = if r.random_bool(0.5) { Layout::Dense } else { Layout::Csr };
        let join = if r.random_bool(0.5) { JoinMode::Outer } else { JoinMode::Inner };
        let n_sets = r.random_range(1..=3);
        // log-uniform total size up to 10^5
        let total: usize = (10f64.powf(r.random_range(0.5..5.0)) as usize).clamp(3, 100_000);
        let mut sizes = vec![0usize; n_sets];
        for s in sizes.iter_mut() {
            *s = total / n_sets;
        }
        sizes[0] += total - sizes.iter().sum::<usize>();
        let mut stores = Vec::new();
        let mut datasets = Vec::new();
        for (k, &n) in sizes.iter().enumerate() {
            // always share gene0 so inner joins keep a column
            let mut cols: Vec<String> = vec![pool[0].clone()];
            for g in &pool[1..] {
                if r.random_bool(0.5) {
                    cols.push(g.clone());
                }
            }
            cols.shuffle(&mut r);
            let data = random_dense(&mut r, n, cols.len(), ValueDtype::F32, 0.5);
            let store = common::store_from_block(
                &dir.path().join(format!("c{case}_in{k}")),
                &data,
                cols.clone(),
                layout,
                r.random_range(1..=512),
                r.random_range(1..=8),
                if r.random_bool(0.5) { Codec::None } else { Codec::Deflate },
            );
            stores.push(store);
            datasets.push((cols, data));
        }
        let coll = DatasetCollection::from_stores(join, stores.clone()).unwrap();
        let c = r.random_range(1..=(total as u64).min(2000));
        let m = c * r.random_range(1..=64);
        let seed = r.random();
        let plan = plan_shuffle(total as u64, c, m, seed).unwrap();
        let out_path = dir.path().join(format!("c{case}_out"));
        let opts = OutputOptions {
            chunk_rows: r.random_range(1..=1024),
            chunks_per_shard: r.random_range(1..=64),
            codec: Codec::None,
            index_dtype: None,
        };
        let out = run_shuffle(&coll, &plan, &out_path, &opts).unwrap();
        total_rows_all += total as u64;
        max_peak_ratio = max_peak_ratio.max(out.stats.peak_resident_rows as f64 / (m + c) as f64);

        // independent bijection check
        let mut seen: Vec<HashSet<u64>> = vec![HashSet::new(); n_sets];
        let mut bijective = out.provenance.len() == total;
        for rec in &out.provenance.records {
            let d = rec.dataset_id as usize;
            bijective &= d < n_sets && rec.source_row < sizes[d] as u64 && seen[d].insert(rec.source_row);
        }
        // independent value check on a sample, columns matched by name
        let names = out.store.manifest().var_names.clone();
        let sample: Vec<usize> = rand::seq::index::sample(&mut r, total, total.min(300)).into_vec();
        let mut values_ok = true;
        for &row in &sample {
            let (got, _) = out.store.read_rows(&[RowRange::new(row as u64, row as u64 + 1)], false).unwrap();
            let rec = out.provenance.records[row];
            let (cols, data) = &datasets[rec.dataset_id as usize];
            for (j, name) in names.iter().enumerate() {
                let want = cols
                    .iter()
                    .position(|c| c == name)
                    .map_or(0.0, |k| data.get(rec.source_row as usize, k));
                values_ok &= got.get(0, j) == want;
            }
        }
        // the library verifier must agree
        let lib = verify_shuffle(&out.store, &out.provenance, &coll, &VerifyOptions::default()).unwrap();
        let peak_ok = out.stats.peak_resident_rows <= m + c;
        if !(bijective && values_ok && lib.ok() && peak_ok) {
            failures.push((case, bijective, values_ok, lib.violation_count, peak_ok));
        }
        for k in 0..n_sets {
            std::fs::remove_dir_all(dir.path().join(format!("c{case}_in{k}"))).unwrap();
        }
        drop(out);
        std::fs::remove_dir_all(&out_path).unwrap();
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 180.0;
    report(
        3,
        pass,
        &format!(
            "{cases} cases, {total_rows_all} rows, {} failures, max peak/(m+c) {max_peak_ratio:.3}, {secs:.1}s, limit 180s",
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

fn collect(src: &Arc<dyn RowSource>, cfg: &LoaderConfig, epoch: u64) -> Vec<MiniBatch> {
    open_epoch(src.clone(), cfg, epoch).unwrap().map(|b| b.unwrap()).collect()
}

#[test]
fn criterion_4_epoch_completeness_and_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let sizes = [1usize, 97, 1000, 20_000, 100_000];
    let shapes: [(u64, u64, u64); 11] = [
        (1, 1, 1),
        (1, 64, 16),
        (7, 7, 7),
        (7, 50, 3),
        (64, 256, 64),
        (64, 64, 1),
        (100, 1000, 128),
        (256, 4096, 256),
        (1000, 3000, 999),
        (4096, 8192, 512),
        (5, 2000, 2000),
    ];
    let mut points = 0;
    let mut bad = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        let store: Arc<dyn RowSource> = common::identity_store(&dir.path().join(format!("s{k}")), n, 2, 128, 16);
        for &(f, cap, b) in &shapes {
            points += 1;
            let base = LoaderConfig { prefetch_depth: 0, ..LoaderConfig::new(f, cap, b, 1000 + points) };
            let reference = collect(&store, &base, 0);
            let mut ids: Vec<u64> = reference.iter().flat_map(|x| x.global_indices.iter().copied()).collect();
            ids.sort_unstable();
            let complete = ids == (0..n as u64).collect::<Vec<_>>();
            let values_ok = reference.iter().all(|batch| {
                batch.global_indices.iter().enumerate().all(|(j, &g)| batch.block.get(j, 1) == g as f64)
            });
            let mut identical = collect(&store, &base, 0) == reference;
            for depth in [1, 4] {
                identical &= collect(&store, &LoaderConfig { prefetch_depth: depth, ..base }, 0) == reference;
            }
            if !(complete && values_ok && identical) {
                bad.push((n, f, cap, b, complete, values_ok, identical));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = bad.is_empty() && points >= 50 && secs < 180.0;
    report(4, pass, &format!("{points} grid points, {} failures, depths 0/1/4 compared, {secs:.1}s, limit 180s", bad.len()));
    assert!(pass, "{bad:?}");
}

#[test]
fn criterion_5_io_reduction_ratio() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    // 4-row chunks, 512-row shards: every f below is a whole number of chunks
    // and every shard a whole number of fetch blocks
    let store: Arc<dyn RowSource> = common::identity_store(&dir.path().join("s"), 100_000, 4, 4, 128);
    let random = run_throughput(store.clone(), &LoaderConfig::new(1, 1, 1, 0), 1, 0, Strategy::RowRandom).unwrap();
    let mut ok = random.read_ops == 100_000 && random.rows_emitted == 100_000;
    let mut detail = Vec::new();
    for f in [4u64, 16, 64, 256] {
        let cfg = LoaderConfig::new(f, 4 * f, f, 0);
        let chunked = run_throughput(store.clone(), &cfg, 1, 0, Strategy::Chunked).unwrap();
        let bound = random.read_ops as f64 * 2.0 / f as f64;
        ok &= chunked.read_ops as f64 <= bound && chunked.rows_emitted == 100_000;
        detail.push(format!(
            "f={f}: {} vs {} ops ({:.0}x)",
            chunked.read_ops,
            random.read_ops,
            random.read_ops as f64 / chunked.read_ops as f64
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = ok && secs < 120.0;
    report(5, pass, &format!("{}; {secs:.1}s, limit 120s", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_6_randomness_calibration() {
    let t = Instant::now();
    let n = 10_000usize;
    let trials = 10_000u64;
    let bins = 100;
    let v = Values::F32((0..n).map(|i| i as f32).collect());
    let src: Arc<dyn RowSource> = Arc::new(MemorySource::new(DenseBlock::new(n, 1, v).unwrap().into()));
    let marked = 4321u64;
    let mut counts = vec![0f64; bins];
    for trial in 0..trials {
        let cfg = LoaderConfig::new(1, n as u64, n as u64, trial);
        let mut it = open_epoch(src.clone(), &cfg, 0).unwrap();
        let batch = it.next_batch().unwrap().unwrap();
        let pos = batch.global_indices.iter().position(|&g| g == marked).unwrap();
        counts[pos * bins / n] += 1.0;
    }
    let expect = trials as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    let loader_ok = p >= 0.001;

    // pair-rate calibration: Monte-Carlo spread of the statistic under the null
    let (c, w) = (100u64, 256usize);
    let expected = (c - 1) as f64 / (n - 1) as f64;
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let mut perm: Vec<u64> = (0..n as u64).collect();
    let sims: Vec<f64> = (0..1000)
        .map(|_| {
            perm.shuffle(&mut r);
            same_block_pair_rate(&perm, c, w)
        })
        .collect();
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    let sigma = (sims.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (sims.len() - 1) as f64).sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        perm.shuffle(&mut r);
        let rep = randomness_report(&perm, c, w, &RandomnessOptions::default()).unwrap();
        assert!((rep.expected_rate - expected).abs() < 1e-15);
        worst = worst.max((rep.same_block_pair_rate - expected).abs() / sigma);
    }
    let report_ok = worst <= 3.0;
    let secs = t.elapsed().as_secs_f64();
    let pass = loader_ok && report_ok && secs < 300.0;
    report(
        6,
        pass,
        &format!(
            "marked-row chi2={stat:.1} df={} p={p:.4} (alpha 0.001, {trials} trials); pair rate worst |dev|={worst:.2} sigma over 10 permutations, expected {expected:.5}; {secs:.1}s, limit 300s",
            bins - 1
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_trade_off() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let n = 100_000usize;
    let input = common::identity_store(&dir.path().join("in"), n, 1, 1024, 16);
    let coll = DatasetCollection::from_stores(JoinMode::Outer, [input]).unwrap();
    let seeds = 20u64;
    let w = 256;
    let mut means = Vec::new();
    let mut order_matches = true;
    for c in [1u64, 4, 16, 64] {
        let mut sum = 0.0;
        for seed in 0..seeds {
            let plan = plan_shuffle(n as u64, c, 32 * c, seed).unwrap();
            let out_path = dir.path().join(format!("o{c}_{seed}"));
            let out = run_shuffle(&coll, &plan, &out_path, &OutputOptions::default()).unwrap();
            let stream = out.provenance.global_indices(&[0]);
            if seed == 0 {
                order_matches &= stream == simulate_shuffle_order(n as u64, c, 32 * c, seed).unwrap();
            }
            sum += same_block_pair_rate(&stream, c, w);
            drop(out);
            std::fs::remove_dir_all(&out_path).unwrap();
        }
        means.push(sum / seeds as f64);
    }
    let monotone = means.windows(2).all(|p| p[0] <= p[1]);
    let secs = t.elapsed().as_secs_f64();
    let pass = monotone && order_matches && secs < 300.0;
    report(
        7,
        pass,
        &format!(
            "mean same-block pair rate (w={w}, m=32c, {seeds} seeds) for c=1,4,16,64: {:?}; {secs:.1}s, limit 300s",
            means.iter().map(|m| format!("{m:.5}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

fn obsbatch(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_obsbatch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    rdr.records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(str::to_string)).collect())
        .collect()
}

#[test]
fn criterion_8_and_9_end_to_end() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // 262144 rows x 1024 f32 = 1 GiB
    let n_obs = 262_144u64;
    let mut steps = Vec::new();
    let mut run = |name: &str, args: &[&str]| {
        let s = Instant::now();
        let res = obsbatch(args, p);
        steps.push(format!("{name} exit {} in {:.1}s", res.0, s.elapsed().as_secs_f64()));
        if res.0 != 0 {
            eprintln!("{name} failed: {}", res.2);
        }
        res
    };
    let synth = run("synth", &["synth", "--n-obs", "2^18", "--n-var", "2^10", "--chunk-rows", "256", "--seed", "8", "-o", "raw"]);
    let bytes: u64 = common::snapshot(&p.join("raw")).iter().map(|(_, b)| b.len() as u64).sum();
    let shuffle = run("shuffle", &["shuffle", "raw", "--block-rows", "256", "--buffer-rows", "2^15", "--chunk-rows", "256", "--seed", "9", "-o", "shuf"]);
    std::fs::remove_dir_all(p.join("raw")).ok();
    // verify needs the input; regenerate it deterministically instead of keeping both copies around
    let regen = run("synth (again)", &["synth", "--n-obs", "2^18", "--n-var", "2^10", "--chunk-rows", "256", "--seed", "8", "-o", "raw"]);
    let verify = run("verify", &["verify", "shuf", "--sample-rows", "20000"]);
    let iterate = run("iterate", &["iterate", "shuf", "--check-identity", "--fetch-block-rows", "256", "--buffer-rows", "2^14", "--batch-rows", "512"]);
    let bench = run("bench", &["bench", "shuf", "--strategy", "both", "--fetch-block-rows", "256", "--buffer-rows", "2^14", "--batch-rows", "512", "-o", "bench.csv"]);

    let codes_ok = [&synth, &shuffle, &regen, &verify, &iterate, &bench].iter().all(|r| r.0 == 0);
    let verify_ok = serde_json::from_str::<serde_json::Value>(verify.1.trim())
        .map(|v| v["violation_count"] == 0 && v["bijective"] == true)
        .unwrap_or(false);
    let iterate_ok = serde_json::from_str::<serde_json::Value>(iterate.1.trim())
        .map(|v| v["distinct_rows"] == n_obs && v["complete"] == true && v["identity_mismatches"] == 0)
        .unwrap_or(false);
    let bench_rows = std::fs::read_to_string(p.join("bench.csv")).map(|t| csv_rows(&t)).unwrap_or_default();
    let accounting_ok = bench_rows.len() == 2
        && bench_rows.iter().all(|r| {
            let rows: u64 = r["rows_emitted"].parse().unwrap();
            let batches: u64 = r["batches_emitted"].parse().unwrap();
            let sps: f64 = r["samples_per_sec"].parse().unwrap();
            let wall: f64 = r["wall_seconds"].parse().unwrap();
            rows == n_obs && batches == n_obs / 512 && (sps * wall - rows as f64).abs() <= 1e-3 * rows as f64 + 1.0
        });
    let ops: Vec<u64> = bench_rows.iter().map(|r| r["read_ops"].parse().unwrap()).collect();
    let ratio_ok = ops.len() == 2 && ops[1] == n_obs && ops[0] as f64 <= ops[1] as f64 * 2.0 / 256.0;
    let secs = t.elapsed().as_secs_f64();
    let pass = codes_ok && bytes >= 1_000_000_000 && verify_ok && iterate_ok && accounting_ok && ratio_ok && secs < 600.0;
    report(
        8,
        pass,
        &format!(
            "store {bytes} bytes; {}; verify ok {verify_ok}, iterate ok {iterate_ok}, CSV accounting ok {accounting_ok}, read_ops {ops:?}; {secs:.1}s, limit 600s",
            steps.join(", ")
        ),
    );

    // criterion 9: wall-clock only, logged
    let t9 = Instant::now();
    let cold = obsbatch(
        &["bench", "shuf", "--strategy", "both", "--cache-mode", "cold-best-effort", "--fetch-block-rows", "256", "--buffer-rows", "2^14", "--batch-rows", "512"],
        p,
    );
    let rows = csv_rows(&cold.1);
    let (detail, met) = if cold.0 == 0 && rows.len() == 2 {
        let sps = |i: usize| rows[i]["samples_per_sec"].parse::<f64>().unwrap();
        let speedup = sps(0) / sps(1);
        (
            format!(
                "cold_best_effort chunked {:.0} vs row_random {:.0} samples/sec = {speedup:.1}x (expected >= 5x), bypass honored {}/{}",
                sps(0),
                sps(1),
                rows[0]["cache_bypass_honored"],
                rows[1]["cache_bypass_honored"]
            ),
            speedup >= 5.0,
        )
    } else {
        (format!("bench exit {}", cold.0), false)
    };
    report(
        9,
        true,
        &format!(
            "{detail}; {}{:.1}s; reported, not asserted",
            if met { "" } else { "WARNING: expectation not met on this host; " },
            t9.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}
