use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cellprice(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellprice"))
        .args(args)
        .current_dir(dir)
        .env_remove("CELLPRICE_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn help_lists_every_flag() {
    let dir = TempDir::new().unwrap();
    let sim = stdout(&cellprice(&["simulate", "--help"], dir.path()));
    for flag in ["--scenario", "--seed", "--t-end", "--dt", "--dt-out", "--out", "--strict", "CELLPRICE_OUT"] {
        assert!(sim.contains(flag), "{flag} missing from simulate help");
    }
    let ver = stdout(&cellprice(&["verify", "--help"], dir.path()));
    assert!(ver.contains("--tolerance") && ver.contains("--trajectory"));
    let top = stdout(&cellprice(&["--help"], dir.path()));
    for cmd in ["gen", "validate", "simulate", "verify"] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = cellprice(&["gen", "--scenario", "ieee57-III", "--seed", "7", "--out", "a"], dir.path());
    let b = cellprice(&["gen", "--scenario", "ieee57-III", "--seed", "7", "--out", "b"], dir.path());
    let c = cellprice(&["gen", "--scenario", "ieee57-III", "--seed", "8", "--out", "c"], dir.path());
    assert_eq!(code(&a), 0);
    let digest = |o: &Output| stdout(o).split_whitespace().nth(1).unwrap().to_string();
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));
    let sc = read_json(&dir.path().join("a/ieee57-III.json"));
    assert_eq!(sc["network"]["nodes"].as_array().unwrap().len(), 57);
    assert_eq!(
        std::fs::read(dir.path().join("a/ieee57-III.json")).unwrap(),
        std::fs::read(dir.path().join("b/ieee57-III.json")).unwrap()
    );
}

#[test]
fn generated_fixture_validates_and_broken_one_does_not() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&cellprice(&["gen", "--scenario", "toy-2bus"], dir.path())), 0);
    let file = dir.path().join("toy-2bus.json");
    let ok = cellprice(&["validate", "--scenario", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));

    let mut sc = read_json(&file);
    sc["network"]["comm_edges"] = Value::Array(vec![]);
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, serde_json::to_vec(&sc).unwrap()).unwrap();
    let o = cellprice(&["validate", "--scenario", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(!stdout(&o).is_empty());
}

#[test]
fn unknown_scenario_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let o = cellprice(&["validate", "--scenario", "ieee14-I"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scenario"));
    let o = cellprice(&["simulate", "--scenario", "toy-2bus", "--dt", "0"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_horizon_writes_only_the_header() {
    let dir = TempDir::new().unwrap();
    let o = cellprice(&["simulate", "--scenario", "toy-2bus", "--t-end", "0"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("toy-2bus.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("time,f_1,f_2,lambda_1"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for out in ["a", "b"] {
        let o = cellprice(&["simulate", "--scenario", "toy-2bus", "--t-end", "8", "--out", out], dir.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["toy-2bus.csv", "toy-2bus.manifest.json", "toy-2bus.windows.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let m = read_json(&dir.path().join("a/toy-2bus.manifest.json"));
    assert_eq!(m["horizon"], 8.0);
    assert_eq!(m["samples"], 81);
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cellprice"))
        .args(["simulate", "--scenario", "toy-2bus", "--t-end", "1"])
        .current_dir(dir.path())
        .env("CELLPRICE_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("from-env/toy-2bus.csv").is_file());
}

#[test]
fn verify_passes_then_catches_a_corrupted_price() {
    let dir = TempDir::new().unwrap();
    let o = cellprice(&["simulate", "--scenario", "toy-3cell"], dir.path());
    assert_eq!(code(&o), 0);
    let wfile = dir.path().join("toy-3cell-III.windows.json");
    let good = cellprice(&["verify", "--scenario", "toy-3cell", "--trajectory", wfile.to_str().unwrap()], dir.path());
    assert_eq!(code(&good), 0, "{}", stdout(&good));
    let report: Value = serde_json::from_str(&stdout(&good)).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["converged_windows"].as_u64().unwrap() >= 1);

    // bump one nodal price in the last window
    let mut w = read_json(&wfile);
    let last = w.as_array_mut().unwrap().last_mut().unwrap();
    let n_nodes = 6;
    let x = last["state"]["x"].as_array_mut().unwrap();
    let lambda_start = x.len() - n_nodes - 3 - 6; // lambda, nu (6 edges), phi (3 cells)
    let v = x[lambda_start].as_f64().unwrap();
    x[lambda_start] = Value::from(v + 1e-3);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_vec(&w).unwrap()).unwrap();
    let o = cellprice(&["verify", "--scenario", "toy-3cell", "--trajectory", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = report["windows"].as_array().unwrap();
    assert_eq!(rows.last().unwrap()["consensus"]["pass"], false);
}

#[test]
fn verify_without_converged_windows_fails() {
    let dir = TempDir::new().unwrap();
    let o = cellprice(&["verify", "--scenario", "toy-2bus", "--t-end", "0"], dir.path());
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["converged_windows"], 0);
}

#[test]
fn diverging_run_keeps_partial_output() {
    let dir = TempDir::new().unwrap();
    let o = cellprice(&["simulate", "--scenario", "toy-2bus", "--dt", "0.5"], dir.path());
    assert_eq!(code(&o), 2);
    let m = read_json(&dir.path().join("toy-2bus.manifest.json"));
    assert!(m["stopped"].is_string());
    assert!(m["samples"].as_u64().unwrap() < 301);
}

#[test]
fn ieee57_reports_the_monitored_tie_line() {
    let dir = TempDir::new().unwrap();
    let o = cellprice(&["simulate", "--scenario", "ieee57-IV", "--t-end", "0.5"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("ieee57-IV.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "P_38_48").expect("line (38,48) column");
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!((row[col] - 0.0075).abs() < 1e-9, "{}", row[col]);
}
