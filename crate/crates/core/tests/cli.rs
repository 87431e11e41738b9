#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn covshrink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covshrink"))
        .args(args)
        .output()
        .expect("spawn covshrink")
}

fn ok(args: &[&str]) -> Output {
    let out = covshrink(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate(dir: &Path, name: &str, model: &str, n: &str, d: &str, seed: &str) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap();
    ok(&["simulate", "--model", model, "--n", n, "--d", d, "--seed", seed, "--out", p]);
    p.to_owned()
}

fn data_rows(path: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split(',').map(|c| c.trim().parse::<f64>().ok()).collect())
        .collect()
}

#[test]
fn simulate_is_deterministic_and_writes_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.csv", "b", "120", "5", "7");
    let b = simulate(dir.path(), "b.csv", "b", "120", "5", "7");
    let c = simulate(dir.path(), "c.csv", "b", "120", "5", "8");
    let bytes = |p: &str| std::fs::read(p).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
    let rows = data_rows(&a);
    assert_eq!(rows.len(), 120);
    assert!(rows.iter().all(|r| r.len() == 5));
    let cfg: Value = serde_json::from_slice(&bytes(&format!("{a}.json"))).unwrap();
    assert_eq!(cfg["model"], "b");
    assert_eq!(cfg["config"]["seed"], 7);
}

#[test]
fn estimate_each_target() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "x.csv", "a", "200", "6", "1");
    let read = |target: &str, extra: &[&str]| {
        let out = dir.path().join(format!("{target}.csv"));
        let mut args = vec!["estimate", "--data", &data, "--target", target, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        ok(&args);
        data_rows(out.to_str().unwrap())
    };
    let sample = read("sample", &[]);
    assert_eq!(sample.len(), 6);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(sample[i][j], sample[j][i]);
        }
    }
    let taper = read("taper", &["--tau-dagger", "2"]);
    assert_eq!(taper[0][5], 0.0);
    assert_eq!(taper[0][0], sample[0][0]);
    let toep = read("toeplitz", &[]);
    for i in 1..6 {
        assert!((toep[i][i - 1] - toep[1][0]).abs() < 1e-12);
        assert!((toep[i][i] - toep[0][0]).abs() < 1e-12);
    }
    let vertex = read("shrink", &["--w", "0,1,0", "--tau-dagger", "2"]);
    for i in 0..6 {
        for j in 0..6 {
            assert!((vertex[i][j] - taper[i][j]).abs() < 1e-12 * (1.0 + taper[i][j].abs()));
        }
    }
    assert_eq!(read("shrink", &[]).len(), 6);
}

#[test]
fn weights_prints_risk_and_simplex_point() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "x.csv", "b", "300", "8", "2");
    let out = ok(&["weights", "--data", &data]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["mse", "e_dagger", "e_diamond", "d_cross", "w", "thresholds"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let w: Vec<f64> = serde_json::from_value(v["w"].clone()).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(w.iter().all(|&x| x >= 0.0));
}

#[test]
fn cpt_test_reports_json_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "x.csv", "a", "150", "4", "3");
    let path = dir.path().join("path.csv");
    let out = ok(&[
        "cpt-test", "--data", &data, "--v", "random:5", "--boot", "99", "--seed", "4",
        "--block", "auto", "--path-out", path.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["statistic", "quantile", "delta", "reject", "argmax_k", "weights_used", "block_len", "n_boot", "level"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n_boot"], 99);
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("k,bridged_value\n"));
    let rows = data_rows(path.to_str().unwrap());
    assert_eq!(rows.len(), 150);
    let max = 150f64.sqrt() * rows.iter().map(|r| r[1].abs()).fold(0.0, f64::max);
    let stat = v["statistic"].as_f64().unwrap();
    assert!((max - stat).abs() <= 1e-9 * stat.max(1.0), "path max {max} vs statistic {stat}");

    let again = ok(&["cpt-test", "--data", &data, "--v", "random:5", "--n-boot", "99", "--seed", "4"]);
    assert_eq!(out.stdout, again.stdout);

    let grid = ok(&["cpt-test", "--data", &data, "--v", "random:5", "--n-boot", "49", "--w", "grid", "--block", "6"]);
    let g: Value = serde_json::from_slice(&grid.stdout).unwrap();
    assert_eq!(g["weights_used"]["kind"], "grid");
    assert_eq!(g["block_len"], 6);
    assert_eq!(covshrink(&["cpt-test", "--data", &data, "--v", "random:5", "--block", "0"]).status.code(), Some(2));
}

fn manifest(dir: &Path, n_list: &str, reps: u32, out: &str) -> String {
    let path = dir.join("m.json");
    let text = format!(
        r#"{{"experiment":"table1","model":"a","n_list":{n_list},"d_rule":"fixed:4",
            "weight_scheme":"w1","mc_reps":{reps},"boot_reps":100,"level":0.1,
            "master_seed":99,"output_path":"{out}"}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn bad_manifest_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let m = manifest(dir.path(), "[20]", 10, out.to_str().unwrap());
    let res = covshrink(&["bench", "table1", "--manifest", &m]);
    assert_eq!(res.status.code(), Some(2));
    let res = covshrink(&["bench", "table2", "--manifest", &m]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn non_finite_data_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nan.csv");
    std::fs::write(&p, "1,2\n3,NaN\n0.5,1\n").unwrap();
    let res = covshrink(&["estimate", "--data", p.to_str().unwrap(), "--target", "sample", "--out", "-"]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn bench_output_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let m = manifest(dir.path(), "[60, 80]", 40, out.to_str().unwrap());
    let run = |threads: &str| {
        let res = Command::new(env!("CARGO_BIN_EXE_covshrink"))
            .args(["bench", "table1", "--manifest", &m])
            .env("COVSHRINK_THREADS", threads)
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        std::fs::read(&out).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn sidecar_records_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("timed.csv");
    let m = manifest(dir.path(), "[400]", 400, out.to_str().unwrap());
    let start = Instant::now();
    ok(&["bench", "table1", "--manifest", &m]);
    let measured = start.elapsed().as_secs_f64();
    let side: Value = serde_json::from_slice(&std::fs::read(format!("{}.json", out.display())).unwrap()).unwrap();
    let total = side["total_wall_time_sec"].as_f64().unwrap();
    assert!(total <= measured);
    assert!((measured - total) <= 0.05 * measured + 0.05, "sidecar {total} vs measured {measured}");
    assert_eq!(side["config_hash"].as_str().unwrap().len(), 64);
}
