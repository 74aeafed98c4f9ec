use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn twodevp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twodevp"))
        .args(args)
        .env("TWODEVP_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .expect("csv exists")
        .records()
        .map(|r| r.expect("valid row"))
        .collect()
}

fn num(r: &csv::StringRecord, i: usize) -> f64 {
    r[i].parse().expect("numeric field")
}

#[test]
fn solve_from_the_double_eigenvalue() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &[
            "solve",
            "--generator",
            "example61",
            "--mu0",
            "1.0",
            "--lambda0",
            "1.0",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    let r = &doc["result"];
    assert!((r["mu"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert!((r["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    let eta1 = doc["backward_error"]["eta1"].as_f64().unwrap();
    assert!(eta1 <= 3e-16, "eta1 = {eta1}");
    let upper = doc["backward_error"]["bracket"][1].as_f64().unwrap();
    assert!((upper - std::f64::consts::SQRT_2 * eta1).abs() <= 1e-30);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["seed"], 0);
    assert_eq!(doc["config"]["mu0"], 1.0);
    let history = fs::read_to_string(dir.path().join("solve_history.csv")).unwrap();
    assert!(history.starts_with("k,mu,lambda,eta,c1,c2,abs_a12,branch\n"));
    assert!(dir.path().join("solve.json").exists());
}

#[test]
fn missing_initial_mu_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &["solve", "--generator", "example61", "--lambda0", "1.0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--mu0") && err.contains("Usage"), "{err}");
}

#[test]
fn bad_sources_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.mtx");
    let missing = missing.to_str().unwrap();
    for args in [
        vec!["solve", "--mu0", "1", "--lambda0", "1"],
        vec![
            "solve",
            "--a",
            missing,
            "--c",
            missing,
            "--mu0",
            "1",
            "--lambda0",
            "1",
        ],
        vec!["dti", "--generator", "orr", "--n", "1"],
        vec![
            "oracle",
            "eigencurves",
            "--generator",
            "example61",
            "--range",
            "1",
            "-1",
        ],
        vec!["bench", "nonexistent"],
    ] {
        let out = twodevp(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn unreachable_tolerance_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &[
            "solve",
            "--generator",
            "example61",
            "--mu0",
            "1.5",
            "--lambda0",
            "0.5",
            "--tol",
            "1e-30",
            "--maxit",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_of(&out)["result"]["status"], "maxit");
}

#[test]
fn eigencurves_locate_the_simple_eigenvalues() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &[
            "oracle",
            "eigencurves",
            "--generator",
            "example61",
            "--range",
            "-1.5",
            "1.5",
            "--points",
            "300",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let samples = csv_rows(&dir.path().join("eigencurves.csv"));
    assert_eq!(samples.len(), 300);
    assert_eq!(samples[0].len(), 7);
    let triplets = csv_rows(&dir.path().join("eigencurve_triplets.csv"));
    assert!(triplets
        .iter()
        .any(|r| (num(r, 1) + 0.744080780565709).abs() <= 1e-9));
}

#[test]
fn dichotomous_on_a_diagonal_pair() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.mtx");
    let b = dir.path().join("b.mtx");
    fs::write(
        &a,
        "%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n-1\n",
    )
    .unwrap();
    fs::write(
        &b,
        "%%MatrixMarket matrix array real general\n2 2\n-1\n0\n0\n1\n",
    )
    .unwrap();
    let out = twodevp(
        dir.path(),
        &[
            "oracle",
            "evopt-dichotomous",
            "--a",
            a.to_str().unwrap(),
            "--b",
            b.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let mu = json_of(&out)["result"]["mu"].as_f64().unwrap();
    assert!((mu - 0.5).abs() <= 1e-8, "mu = {mu}");
}

#[test]
fn dti_scan_on_a_small_orr_sommerfeld_operator() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &["oracle", "dti-scan", "--generator", "orr", "--n", "200"],
    );
    assert_eq!(out.status.code(), Some(0));
    let beta = json_of(&out)["result"]["beta"].as_f64().unwrap();
    assert!(beta.is_finite() && beta > 0.0);
}

#[test]
fn dti_on_a_random_stable_matrix_validates() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &[
            "dti",
            "--generator",
            "random-stable",
            "--m",
            "10",
            "--validate",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["result"]["validated"], "passed");
    assert!(doc["backward_error"]["eta2"].as_f64().unwrap() <= 1e-14);
    assert!(dir.path().join("dti_history.csv").exists());
}

#[test]
fn rqminmax_on_a_mimo_instance() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(dir.path(), &["rqminmax", "--generator", "mimo", "--m", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    assert_eq!(doc["result"]["status"], "solved");
    assert!(doc["result"]["case_taken"].is_string());
}

#[test]
fn table61_bench() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(dir.path(), &["bench", "table61"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("table61.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(&rows[4][0], "4");
    assert!(num(&rows[4], 3) <= 1e-14);
    assert!(num(&rows[4], 4) <= 1e-14);
}

#[test]
fn table62_bench() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(dir.path(), &["bench", "table62"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("table62.csv"));
    assert!(rows.len() <= 7);
    let last_a12 = rows
        .iter()
        .rev()
        .find_map(|r| r[6].parse::<f64>().ok())
        .unwrap();
    assert!(last_a12 <= 1e-14);
}

#[test]
fn basin_map_bench() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(dir.path(), &["bench", "basin-map", "--grid", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("basin_map.csv"));
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().filter(|r| &r[4] == "converged").count() >= 380);
}

#[test]
fn dti_orr_bench_agrees_with_scan() {
    let dir = TempDir::new().unwrap();
    let out = twodevp(
        dir.path(),
        &["bench", "dti-orr", "--n", "200", "--points", "501"],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("dti_orr.csv"));
    assert_eq!(rows.len(), 2);
    let (b1, b2) = (num(&rows[0], 1), num(&rows[1], 1));
    assert!((b1 - b2).abs() / b2 <= 5e-5, "{b1} vs {b2}");
}

#[test]
fn outputs_are_reproducible() {
    let run = |seed: &str| {
        let dir = TempDir::new().unwrap();
        let out = twodevp(
            dir.path(),
            &[
                "--seed",
                seed,
                "solve",
                "--generator",
                "random",
                "--n",
                "8",
                "--mu0",
                "0.1",
                "--lambda0",
                "0.2",
            ],
        );
        assert_ne!(out.status.code(), Some(1));
        let csv = fs::read(dir.path().join("solve_history.csv")).unwrap();
        let json = fs::read(dir.path().join("solve.json")).unwrap();
        (out.stdout, csv, json)
    };
    let first = run("3");
    assert_eq!(first, run("3"));
    assert_ne!(first.2, run("4").2);
}

#[test]
fn out_dir_flag_overrides_the_environment() {
    let env_dir = TempDir::new().unwrap();
    let flag_dir = TempDir::new().unwrap();
    let out = twodevp(
        env_dir.path(),
        &[
            "--out-dir",
            flag_dir.path().to_str().unwrap(),
            "bench",
            "table62",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_dir.path().join("table62.csv").exists());
    assert!(!env_dir.path().join("table62.csv").exists());
}
