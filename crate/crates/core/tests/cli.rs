mod common;

use std::path::Path;
use std::process::{Command, Output};

use obsbatch::store::{open_store, Layout, RowBlock};

fn obsbatch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obsbatch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn last_stderr_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(err.lines().last().unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn csv_ingest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.csv"), "a,b\n1,2\n3,4\n").unwrap();
    ok(&obsbatch(&["ingest", "in.csv", "--format", "csv", "-o", "st"], dir.path()));
    let s = open_store(&dir.path().join("st")).unwrap();
    assert_eq!(s.manifest().var_names, ["a", "b"]);
    assert_eq!(s.manifest().layout, Layout::Dense);
    let d = s.read_all().unwrap().to_dense();
    assert_eq!((d.get(0, 0), d.get(0, 1), d.get(1, 0), d.get(1, 1)), (1.0, 2.0, 3.0, 4.0));
}

#[test]
fn ragged_csv_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.csv"), "a,b\n1,2\n3\n").unwrap();
    let o = obsbatch(&["ingest", "in.csv", "--format", "csv", "-o", "st"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = last_stderr_json(&o);
    assert_eq!(e["kind"], "usage");
    assert!(e["error"].as_str().unwrap().contains("line 3"), "{e}");
}

#[test]
fn triplet_ingest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.txt"), "2 3\n1 0 7\n0 2 5\n").unwrap();
    ok(&obsbatch(&["ingest", "t.txt", "--format", "triplet", "-o", "st"], dir.path()));
    let s = open_store(&dir.path().join("st")).unwrap();
    let RowBlock::Csr(c) = s.read_all().unwrap() else { panic!("expected csr") };
    assert_eq!(c.indptr, [0, 1, 2]);
    assert_eq!(c.indices, [2, 0]);
    let d = obsbatch::store::to_dense(&c);
    let rows: Vec<Vec<f64>> = (0..2).map(|i| (0..3).map(|j| d.get(i, j)).collect()).collect();
    assert_eq!(rows, [[0.0, 0.0, 5.0], [7.0, 0.0, 0.0]]);
}

#[test]
fn triplet_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("dup.txt"), "2 3\n0 2 5\n0 2 5\n").unwrap();
    let o = obsbatch(&["ingest", "dup.txt", "--format", "triplet", "-o", "a"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = last_stderr_json(&o)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("line 3") && msg.contains("duplicate"), "{msg}");
    assert!(!dir.path().join("a").join("manifest.json").exists());

    std::fs::write(dir.path().join("oob.txt"), "2 3\n0 3 5\n").unwrap();
    let o = obsbatch(&["ingest", "oob.txt", "--format", "triplet", "-o", "b"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(last_stderr_json(&o)["error"].as_str().unwrap().contains("line 2"));
}

#[test]
fn synth_identity_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["x", "y"] {
        ok(&obsbatch(
            &["synth", "--n-obs", "10^3", "--n-var", "5", "--seed", "42", "--chunk-rows", "64", "-o", out],
            dir.path(),
        ));
    }
    let s = open_store(&dir.path().join("x")).unwrap();
    let d = s.read_all().unwrap().to_dense();
    assert_eq!(d.n_rows, 1000);
    for i in 0..1000 {
        assert_eq!(d.get(i, 0), i as f64);
    }
    assert_eq!(common::snapshot(&dir.path().join("x")), common::snapshot(&dir.path().join("y")));
}

#[test]
fn synth_csr_density_matches_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let (n, n_var, density) = (2000usize, 10_000u64, 0.01);
    ok(&obsbatch(
        &["synth", "--n-obs", "2000", "--n-var", "10^4", "--layout", "csr", "--density", "0.01", "--seed", "1", "-o", "c"],
        dir.path(),
    ));
    let s = open_store(&dir.path().join("c")).unwrap();
    let RowBlock::Csr(c) = s.read_all().unwrap() else { panic!() };
    // rows 1.. have the identity entry plus Binomial(n_var - 1, p') others
    let p = (density * n_var as f64 - 1.0) / (n_var - 1) as f64;
    let rows = (n - 1) as f64;
    let mean = (c.nnz() as f64) / rows;
    let expected = 1.0 + p * (n_var - 1) as f64;
    let sigma = ((n_var - 1) as f64 * p * (1.0 - p) / rows).sqrt();
    assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean} expected {expected} sigma {sigma}");
    assert!((expected - 100.0).abs() < 1e-9);
    for i in 0..n {
        let r = c.row_range(i);
        if i > 0 {
            assert_eq!(c.indices[r.start], 0);
            assert_eq!(c.data.get_f64(r.start), i as f64);
        }
    }
}

#[test]
fn synth_respects_disk_budget_and_dtype_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = obsbatch(&["synth", "--n-obs", "2^20", "--n-var", "2^10", "--disk-budget", "2^30", "-o", "big"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(last_stderr_json(&o)["error"].as_str().unwrap().contains("budget"));
    let o = obsbatch(&["synth", "--n-obs", "300", "--n-var", "2", "--dtype", "u8", "-o", "u"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shuffle_then_verify_then_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&obsbatch(&["synth", "--n-obs", "3000", "--n-var", "4", "--seed", "1", "--chunk-rows", "50", "-o", "a"], p));
    ok(&obsbatch(&["synth", "--n-obs", "1200", "--n-var", "6", "--seed", "2", "--codec", "deflate", "-o", "b"], p));
    let o = obsbatch(&["shuffle", "a", "b", "--join", "inner", "--block-rows", "32", "--buffer-rows", "2^9", "--seed", "5", "--chunk-rows", "100", "-o", "sh"], p);
    ok(&o);
    let stats: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(stats["rows_written"], 4200);
    assert!(stats["peak_resident_rows"].as_u64().unwrap() <= 512 + 32);
    // inner join keeps obs_index, v1..v3
    assert_eq!(open_store(&p.join("sh")).unwrap().n_var(), 4);
    let o = obsbatch(&["verify", "sh", "--all"], p);
    ok(&o);
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["violation_count"], 0);
    assert_eq!(report["bijective"], true);

    // overwrite the first row's bytes in the output with zeros
    let shard = obsbatch::store::shard::shard_path(&p.join("sh"), 0);
    let mut bytes = std::fs::read(&shard).unwrap();
    bytes[..16].fill(0xAB);
    std::fs::write(&shard, bytes).unwrap();
    let o = obsbatch(&["verify", "sh", "--all"], p);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["violations"][0]["kind"], "value_mismatch");
    assert_eq!(report["violations"][0]["output_row"], 0);
    assert_eq!(last_stderr_json(&o)["kind"], "verification");
}

#[test]
fn multi_pass_shuffle_verifies_against_originals() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&obsbatch(&["synth", "--n-obs", "2000", "--n-var", "3", "--seed", "1", "-o", "a"], p));
    ok(&obsbatch(&["shuffle", "a", "--block-rows", "16", "--buffer-rows", "128", "--passes", "3", "-o", "sh"], p));
    assert!(!p.join("sh.pass0").exists() && !p.join("sh.pass1").exists());
    ok(&obsbatch(&["verify", "sh", "--all"], p));
    // identity channel: values must agree with the composed provenance
    let s = open_store(&p.join("sh")).unwrap();
    let (_, prov) = obsbatch::preshuffle::read_provenance(&p.join("sh")).unwrap();
    let d = s.read_all().unwrap().to_dense();
    for (k, rec) in prov.records.iter().enumerate() {
        assert_eq!(d.get(k, 0), rec.source_row as f64);
    }
}

#[test]
fn iterate_reports_complete_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&obsbatch(&["synth", "--n-obs", "5000", "--n-var", "3", "--layout", "csr", "--density", "0.7", "--chunk-rows", "128", "-o", "c"], p));
    let o = obsbatch(&["iterate", "c", "--epochs", "2", "--check-identity", "--fetch-block-rows", "128", "--buffer-rows", "2^10", "--batch-rows", "300"], p);
    ok(&o);
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for l in &lines {
        assert_eq!(l["distinct_rows"], 5000);
        assert_eq!(l["complete"], true);
        assert_eq!(l["identity_mismatches"], 0);
        assert_eq!(l["blocks_fetched"], 40);
    }
    assert_ne!(lines[0]["index_checksum"], lines[1]["index_checksum"]);
    // prefetch depth does not change the stream
    let again = obsbatch(&["iterate", "c", "--epochs", "2", "--prefetch-depth", "0", "--fetch-block-rows", "128", "--buffer-rows", "1024", "--batch-rows", "300"], p);
    let again: Vec<serde_json::Value> = stdout(&again).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for (a, b) in lines.iter().zip(&again) {
        assert_eq!(a["index_checksum"], b["index_checksum"]);
        assert_eq!(a["value_checksum"], b["value_checksum"]);
    }
}

#[test]
fn bench_counters_differ_by_fetch_factor() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&obsbatch(&["synth", "--n-obs", "2^13", "--n-var", "4", "--chunk-rows", "64", "-o", "s"], p));
    let o = obsbatch(&["bench", "s", "--fetch-block-rows", "64", "--buffer-rows", "256", "--batch-rows", "64", "-o", "bench.csv"], p);
    ok(&o);
    let text = std::fs::read_to_string(p.join("bench.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][col("strategy")], "chunked");
    assert_eq!(&rows[1][col("strategy")], "row_random");
    let ops = |r: &csv::StringRecord| r[col("read_ops")].parse::<u64>().unwrap();
    assert_eq!(ops(&rows[0]), 128);
    assert_eq!(ops(&rows[1]), 8192);
    for r in &rows {
        assert_eq!(&r[col("rows_emitted")], "8192");
    }

    let o = obsbatch(&["bench", "s", "--strategy", "chunked", "--sweep", "batch_rows", "--values", "64,256,1024,2^20", "--buffer-rows", "1024"], p);
    ok(&o);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.starts_with("parameter,value,samples_per_sec"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
}

#[test]
fn inspect_genetics_dense_layout() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = obsbatch(&["suggest-chunking", "--layout", "dense", "--target-elements", "2^21", "--n-var", "2^19"], p);
    ok(&o);
    let s: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(s["chunk_rows"], 4);
    assert_eq!(s["chunks_per_shard"], 128);
    ok(&obsbatch(&["synth", "--n-obs", "8", "--n-var", "2^19", "--chunk-rows", "4", "--chunks-per-shard", "128", "-o", "g"], p));
    let o = obsbatch(&["inspect", "g"], p);
    ok(&o);
    let out = stdout(&o);
    assert!(out.contains("\"chunk_rows\": 4"));
    let summary = out.lines().last().unwrap();
    assert!(summary.contains("chunk_rows=4") && summary.contains("shard_capacity_rows=512"), "{summary}");
}

#[test]
fn resolved_config_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = obsbatch(&["suggest-chunking", "--layout", "csr", "--target-elements", "2^21", "--mean-nnz", "512"], p);
    ok(&o);
    let first: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).lines().next().unwrap()).unwrap();
    assert_eq!(first["resolved_config"]["command"]["target_elements"], 2097152);
    assert_eq!(first["resolved_config"]["seed"], 0);
    assert!(stdout(&o).contains("\"chunk_rows\":4096"));

    let o = obsbatch(&["suggest-chunking", "--layout", "csr", "--target-elements", "5", "--mean-nnz", "0"], p);
    assert_eq!(o.status.code(), Some(2));
    let o = obsbatch(&["inspect", "missing"], p);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(last_stderr_json(&o)["kind"], "io");
    let o = obsbatch(&["synth", "--n-obs", "two", "--n-var", "1", "-o", "x"], p);
    assert_eq!(o.status.code(), Some(2));
    let o = obsbatch(&["verify", "missing"], p);
    assert_eq!(o.status.code(), Some(3));
    ok(&obsbatch(&["--help"], p));
}
