use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchcount"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn nonzero_rows(csv_text: &str) -> Vec<(String, f64)> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    r.records()
        .map(|rec| rec.unwrap())
        .map(|rec| (rec[1].to_string(), rec[2].parse::<f64>().unwrap()))
        .filter(|(_, c)| c.abs() > 1e-12)
        .collect()
}

#[test]
fn spectrum_dictator_and_parity() {
    let out = run(&["spectrum", "--family", "dictator", "-n", "3", "-p", "0.5"]);
    assert!(out.status.success());
    let rows = nonzero_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].0, "{}");
    assert_eq!(rows[1].0, "{1}");
    assert!(rows.iter().all(|(_, c)| (c - 0.5).abs() < 1e-15));

    let out = run(&["spectrum", "--family", "parity", "-n", "2", "-p", "0.5"]);
    let rows = nonzero_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), vec!["{}", "{1,2}"]);
}

#[test]
fn spectrum_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("maj.csv");
    let out = run(&["spectrum", "--family", "majority", "-n", "5", "-p", "0.3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let p = switchcount::BiasParam::new(0.3).unwrap();
    let s = switchcount::Spectrum::read_csv(std::fs::File::open(&path).unwrap(), p).unwrap();
    let f = switchcount::spectral::inverse_transform(&s).unwrap();
    assert_eq!(f.truth_table(), switchcount::BooleanFunction::majority(5).unwrap().truth_table());
}

#[test]
fn moments_reports() {
    let v = json_of(&run(&["moments", "--family", "dictator", "-n", "2", "-p", "0.5", "--reproducible"]));
    let r = &v["report"];
    assert!((r["expected_count"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    for k in ["second_series", "second_fourier", "second_increasing"] {
        assert!((r[k].as_f64().unwrap() - 0.75).abs() < 1e-10, "{k}");
    }
    assert!(v.get("generated_at_unix").is_none());

    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("zero.tt");
    std::fs::write(&table, "n=3\n00000000\n").unwrap();
    let v = json_of(&run(&["moments", "--table", table.to_str().unwrap(), "-p", "0.3"]));
    assert_eq!(v["report"]["expected_count"].as_f64().unwrap(), 0.0);
    assert_eq!(v["report"]["second_series"].as_f64().unwrap(), 0.0);
    assert!(v.get("generated_at_unix").is_some());

    let v = json_of(&run(&["moments", "--family", "majority", "-n", "3", "-p", "0.5"]));
    let res = &v["report"]["residuals"];
    assert!(res["series_vs_fourier"].as_f64().unwrap() < 1e-8);
    assert!(res["increasing_vs_series"].as_f64().unwrap() < 1e-8);
}

#[test]
fn influence_and_simulate() {
    let v = json_of(&run(&["influence", "--family", "majority", "-n", "3"]));
    assert!((v["influence"]["total"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let a = run(&["simulate", "--family", "parity", "-n", "4", "--trials", "5000", "--seed", "3", "--reproducible"]);
    let b = run(&["simulate", "--family", "parity", "-n", "4", "--trials", "5000", "--seed", "3", "--reproducible"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json_of(&a);
    assert!((v["summary"]["mean"].as_f64().unwrap() - 2.0).abs() < 0.1);
    let rows = run(&["simulate", "--family", "dictator", "-n", "3", "--trials", "10", "--per-trial"]);
    let text = String::from_utf8(rows.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("trial,count,jumps"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("maj");
    let args = [
        "sweep", "--family", "majority", "--n-grid", "3:9:2", "--trials", "2000", "--reproducible", "--out",
        out.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = std::fs::read(out.with_extension("json")).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(first, std::fs::read(out.with_extension("json")).unwrap());
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert!(Path::new(&out.with_extension("csv")).exists());

    let bad = run(&["sweep", "--family", "majority", "--n-grid", "3,5", "--schedule", "inverse:4"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("schedule"));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"family": "parity", "n": 2, "p": 0.5, "reproducible": true}"#).unwrap();
    let v = json_of(&run(&["moments", "--config", cfg.to_str().unwrap()]));
    assert!((v["report"]["second_fourier"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    std::fs::write(&cfg, r#"{"famly": "parity"}"#).unwrap();
    assert!(!run(&["moments", "--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn verify_exit_codes() {
    let ok = run(&["verify", "--n-max", "4", "--p-grid", "0.3,0.5", "--mc-trials", "20000", "--reproducible"]);
    let v = json_of(&ok);
    assert_eq!(v["passed"], true);
    assert_eq!(v["increasing_constant"]["constant"].as_f64(), Some(2.0));
    let bad = run(&["verify", "--n-max", "4", "--p-grid", "0.3", "--corrupt-butterfly"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("orthonormality_butterfly"));
}
