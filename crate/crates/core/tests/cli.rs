mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{golden, toy_dir};

fn hts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hts")).args(args).output().unwrap()
}

fn toy_args<'a>(dir: &'a Path, rest: &[&'a str]) -> Vec<String> {
    let p = |f: &str| dir.join(f).display().to_string();
    let mut v = vec![
        "--config".to_string(),
        p("config.txt"),
        "--data".into(),
        p("data.csv"),
        "--hierarchy".into(),
        p("hierarchy.csv"),
        "--splits".into(),
        p("splits.csv"),
    ];
    v.extend(rest.iter().map(|s| s.to_string()));
    v
}

fn run(sub: &str, rest: &[&str]) -> Output {
    let dir = toy_dir();
    let mut args = vec![sub.to_string()];
    args.extend(toy_args(&dir, rest));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    hts(&refs)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn naive_forecast_repeats_last_training_value() {
    let o = run("forecast", &["--node", "Total", "--method", "nve", "--split", "TS4", "--granularity", "w"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,Total"));
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // last training month is 2018-12
    let data = fs::read_to_string(toy_dir().join("data.csv")).unwrap();
    let dec = data.lines().find(|l| l.starts_with("2018,12,")).unwrap();
    let last: f64 = dec.split(',').skip(2).map(|v| v.parse::<f64>().unwrap()).sum();
    assert_eq!(values.len(), 12);
    assert!(values.iter().all(|v| *v == last));
}

#[test]
fn reconcile_prints_coherent_rows() {
    for w in ["bup", "top", "ols", "var", "stc", "mit", "cov"] {
        let o = run("reconcile", &["--base", "ets", "--weights", w, "--split", "TS1", "--granularity", "w"]);
        assert!(o.status.success(), "{w}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        assert!(text.starts_with("step,Total,A,B\n"));
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            assert!((v[0] - v[1] - v[2]).abs() <= 1e-8 * v[0].abs().max(1.0), "{w}: {line}");
        }
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let o = run("forecast", &["--node", "Nowhere", "--method", "nve", "--split", "TS1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let o = run("forecast", &["--node", "A", "--method", "xyz", "--split", "TS1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(hts(&["evaluate", "--bogus"]).status.code(), Some(2));
    assert_eq!(hts(&["--set", "nokey=1", "pivot", "--in", "x.csv"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("data.csv");
    fs::write(&bad, "year,week,A\n2011,1,3\n").unwrap();
    let h = toy_dir().join("hierarchy.csv");
    let o = hts(&[
        "ingest",
        "--data",
        bad.to_str().unwrap(),
        "--hierarchy",
        h.to_str().unwrap(),
        "--out",
        dir.path().join("store").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn ingest_then_forecast_from_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let o = run("ingest", &["--out", store.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "nodes,rows\n3,120\n");
    let o = hts(&[
        "forecast",
        "--set",
        "period=12",
        "--store",
        store.to_str().unwrap(),
        "--node",
        "B",
        "--method",
        "snv",
        "--split",
        "TS3",
        "--granularity",
        "q",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn pivot_wide_long_wide_is_identity() {
    let wide = golden("toy_accuracy_wide.csv");
    let o = hts(&["pivot", "--in", wide.to_str().unwrap(), "--reverse"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tempfile::tempdir().unwrap();
    let long = dir.path().join("long.csv");
    fs::write(&long, &o.stdout).unwrap();
    let o = hts(&["pivot", "--in", long.to_str().unwrap(), "--decimals", "2"]);
    assert!(o.status.success());
    let original = fs::read_to_string(&wide).unwrap();
    let body: String = original.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert_eq!(stdout(&o), body);

    let o = hts(&["pivot", "--in", golden("toy_accuracy_long.csv").to_str().unwrap(), "--decimals", "2"]);
    assert_eq!(stdout(&o), body);
}

#[test]
fn temporal_prints_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("temporal", &["--node", "Total", "--split", "TS3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("TS3,")).collect();
    assert_eq!(rows.len(), 6);
    assert!(dir.path().join("temporal_Total_TS3_long.csv").exists());
}

#[test]
fn features_and_pca_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let acc = golden("toy_accuracy_long.csv");
    let o = run("features", &["--accuracy", acc.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let features = fs::read_to_string(dir.path().join("features.csv")).unwrap();
    // 3 nodes at 6 granularities
    assert_eq!(features.lines().filter(|l| !l.starts_with('#')).count(), 1 + 18);
    assert!(dir.path().join("pca_level1_w.csv").exists());
}
