use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penta-coulomb")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

const UNIT: [&str; 4] = ["--linkage", "1,1,1,1,1", "--charges", "1,1,1,1,1"];

#[test]
fn minimize_json_and_csv_agree() {
    let j = run(&[&["minimize"], &UNIT[..]].concat());
    assert!(j.status.success());
    let j = json(&j);
    let c = run(&[&["minimize"], &UNIT[..], &["--format", "csv"]].concat());
    let (header, rows) = csv(&String::from_utf8(c.stdout).unwrap());
    assert_eq!(header[0], "E");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], j["E"].as_f64().unwrap());
    for k in 0..5 {
        assert_eq!(rows[0][1 + k], j["diagonals"][k].as_f64().unwrap());
        assert_eq!(rows[0][6 + 2 * k], j["configuration"][k][0].as_f64().unwrap());
    }
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    assert!((j["E"].as_f64().unwrap() - 5.0 / phi).abs() < 1e-9);
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("min.json");
    let to_file = run(&[&["minimize"], &UNIT[..], &["--out", path.to_str().unwrap()]].concat());
    assert!(to_file.status.success());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written, json(&run(&[&["minimize"], &UNIT[..]].concat())));
}

#[test]
fn stabilize_then_minimize_round_trips() {
    let out = run(&["stabilize", "--linkage", "1,1.2,0.9,1.1,1", "--b2", "1.7", "--b4", "1.6", "--charges", "1,2,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let j = json(&out);
    let (s, t) = (j["s"].as_f64().unwrap(), j["t"].as_f64().unwrap());
    assert!(s > 0.0 && t > 0.0 && j["residual"].as_f64().unwrap() < 1e-8);
    let q = format!("1,2,{t},1,{s}");
    let m = json(&run(&["minimize", "--linkage", "1,1.2,0.9,1.1,1", "--charges", &q]));
    let b = &m["diagonals"];
    assert!((b[1].as_f64().unwrap() - 1.7).abs() < 1e-6);
    assert!((b[3].as_f64().unwrap() - 1.6).abs() < 1e-6);
}

#[test]
fn navigate_csv_and_json_agree() {
    let args = ["navigate", "--linkage", "1,1,1,1,1", "--b2", "1.6,1.5", "--b4", "1.6,1.7", "--steps", "10"];
    let j = run(&args);
    assert!(j.status.success());
    assert!(String::from_utf8_lossy(&j.stderr).contains("navigated 10 steps"));
    let j = json(&j);
    let c = run(&[&args[..], &["--format", "csv"]].concat());
    let (header, rows) = csv(&String::from_utf8(c.stdout).unwrap());
    assert_eq!(header.len(), 4 + 10);
    let steps = j["steps"].as_array().unwrap();
    assert_eq!(rows.len(), steps.len());
    assert_eq!(steps.len(), 11);
    for (row, step) in rows.iter().zip(steps) {
        assert_eq!(row[1], step["s"].as_f64().unwrap());
        assert_eq!(row[3], step["E"].as_f64().unwrap());
    }
}

#[test]
fn zero_steps_is_an_error() {
    let out = run(&["navigate", "--linkage", "1,1,1,1,1", "--b2", "1.6,1.5", "--b4", "1.6,1.7", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["code"], "invalid_argument");
}

#[test]
fn malformed_input_yields_structured_errors() {
    for (args, code) in [
        (vec!["minimize", "--linkage", "{bad", "--charges", "1"], "invalid_argument"),
        (vec!["minimize", "--linkage", "1,1,5,1,1", "--charges", "1,1,1,1,1"], "invalid_linkage"),
        (vec!["minimize", "--linkage", "1,1,1,1,1", "--charges", "1,1,-1,1,1"], "non_positive_charge"),
        (vec!["stabilize", "--config", "[[0,0],[1,0],[0,1],[1,1]]"], "not_convex"),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty());
        let e: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("{args:?}"));
        assert_eq!(e["error"]["code"], code, "{args:?}: {e}");
        assert!(e["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn quick_verify_passes() {
    let out = run(&["verify", "--suite", "cm-volume", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1/1 suites passed"));
}
