use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matprolate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn verify_defaults_pass() {
    let out = run(&["verify", "--n", "4", "--p", "1", "--N", "10", "--alpha", "0.3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    for key in ["params", "checks", "tool_version"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    for c in doc["checks"].as_array().unwrap() {
        assert!(c["pass"].as_bool().unwrap(), "{c}");
        assert!(c["residual"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn bad_parameters_exit_2() {
    assert_eq!(run(&["verify", "--p", "5", "--n", "4"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn mutation_fails_commutator() {
    let out = run(&["verify", "--mutate", "drop-e0"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    let comm = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "commutator")
        .unwrap();
    assert_eq!(comm["pass"], false);
    assert!(comm["residual"].as_f64().unwrap() > 1e-4);
}

#[test]
fn spectrum_csv_shape() {
    let out = run(&["spectrum", "--N", "15", "--alpha", "0.3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows[0].join(","), "index,b_eig,s_eig,cross_residual,cluster");
    assert_eq!(rows.len(), 33);
    // 17 significant digits in scientific notation.
    let mantissa = rows[1][1].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.len(), 18);
}

#[test]
fn kernel_check_grid() {
    let out = run(&["kernel-check", "--grid", "12", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 145);
    let col = rows[0].iter().position(|h| h == "residual").unwrap();
    let worst = rows[1..]
        .iter()
        .map(|r| r[col].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn noiseless_reconstruction() {
    let out = run(&["reconstruct", "--noise", "0", "--modes", "all", "--alpha", "0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!(doc["reconstruction"]["relative_error"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn reconstruction_is_deterministic() {
    let args = ["reconstruct", "--noise", "1e-3", "--seed", "42", "--modes", "12"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["reconstruct", "--noise", "1e-3", "--seed", "43", "--modes", "12"]);
    assert_ne!(a.stdout, c.stdout);
    let csv = run(&["reconstruct", "--noise", "1e-3", "--seed", "42", "--format", "csv"]);
    assert_eq!(csv_rows(&csv).len(), 202);
}

#[test]
fn spectrum_is_deterministic() {
    let a = run(&["spectrum", "--N", "12", "--format", "csv"]);
    let b = run(&["spectrum", "--N", "12", "--format", "csv"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn eigenfunction_export() {
    let out = run(&["eigenfunctions", "--N", "5", "--modes", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows[0].join(","), "mode,x,f1,f2");
    assert_eq!(rows.len(), 1 + 3 * 201);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), -1.0);
    assert!((rows[201][1].parse::<f64>().unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(run(&["eigenfunctions", "--N", "5", "--modes", "13"]).status.code(), Some(2));
}

#[test]
fn anomalies_report() {
    let out = run(&["verify", "--report-anomalies"]);
    let doc = json(&out);
    let rows = doc["anomalies"]["norm_ratios"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 21);
    assert!((rows[0]["ratio"][0].as_f64().unwrap() - 25.0).abs() < 1e-9);
    assert!(!doc["anomalies"]["h_prefactor"].as_array().unwrap().is_empty());
}

#[test]
fn unwritable_output_exits_3() {
    let out = run(&["spectrum", "--N", "2", "--out", "/nonexistent-dir/spectrum.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn writes_to_file() {
    let dir = std::env::temp_dir().join(format!("matprolate-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("checks.csv");
    let out = run(&["verify", "--N", "4", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("name,residual,tolerance,pass\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}
