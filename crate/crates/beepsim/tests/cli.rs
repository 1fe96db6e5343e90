//! Black-box checks of the binary: exit codes, output formats, and
//! byte-level determinism, driven through `std::process::Command`.

use beepsim::election::{ElectProgram, ElectionParams, SubKind};
use beepsim::machine::audit_state_count;
use std::fs;
use std::process::{Command, Output};

fn beepsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beepsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let out = beepsim(&[
        "elect", "--algo", "quantum", "--n", "2", "--epsilon", "1/4", "--trials", "1", "--seed",
        "0", "--out", "/tmp/never-written.csv",
    ]);
    assert_eq!(exit_code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_required_flags_are_a_usage_error() {
    let out = beepsim(&["elect", "--algo", "fixed-error"]);
    assert_eq!(exit_code(&out), 2);
    let out = beepsim(&["elect", "--epsilon", "0/1", "--algo", "fixed-error"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn analyze_reports_space_overflow_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("analysis.json");
    let out = beepsim(&[
        "analyze", "--algo", "fixed-error", "--n", "6", "--epsilon", "1/4", "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let out = beepsim(&[
        "elect", "--algo", "fixed-error", "--n", "1", "--epsilon", "1/2", "--trials", "1",
        "--seed", "0", "--out", "/nonexistent-dir/report.csv",
    ]);
    assert_eq!(exit_code(&out), 4);
    let out = beepsim(&[
        "counter", "--program", "/nonexistent-dir/prog.cm", "--n", "2", "--epsilon", "1/4",
        "--trials", "1", "--seed", "0", "--out", "/tmp/never-written.csv",
    ]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn election_csv_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = beepsim(&[
            "elect", "--algo", "fixed-error", "--n", "1,2,4", "--epsilon", "1/2", "--trials",
            "60", "--seed", "7", "--workers", "3", "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes_a = fs::read(&a).unwrap();
    let bytes_b = fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b);
    let text = String::from_utf8(bytes_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "protocol,n,epsilon,q,n_lower_bound,trials,violations,liveness_failures,\
         rounds_p50,rounds_p95,rounds_p99,rounds_max,wilson_lo,wilson_hi,seed"
            .replace(" ", "")
    );
    assert_eq!(lines.count(), 3, "one data row per population size");
}

#[test]
fn trace_output_is_valid_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let out = beepsim(&[
        "trace", "--algo", "constant-state", "--n", "3", "--seed", "17", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut kinds = std::collections::BTreeSet::new();
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).expect("line parses");
        kinds.insert(value["type"].as_str().expect("tagged record").to_string());
    }
    for expected in ["meta", "round", "event", "end"] {
        assert!(kinds.contains(expected), "missing record type {expected}; got {kinds:?}");
    }
}

#[test]
fn audit_prints_the_library_state_count() {
    let out = beepsim(&["audit", "--algo", "fixed-error", "--epsilon", "1/8"]);
    assert_eq!(exit_code(&out), 0);
    let printed: usize = String::from_utf8_lossy(&out.stdout).trim().parse().expect("an integer");
    let params = ElectionParams::new(SubKind::FixedError, 2, (1, 8), 1).unwrap();
    let expected = audit_state_count(&ElectProgram::new(params), 1_000_000).unwrap();
    assert_eq!(printed, expected);
}

#[test]
fn config_file_drives_a_full_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("from-config.csv");
    let config = dir.path().join("experiment.json");
    fs::write(
        &config,
        serde_json::json!({
            "protocol": "double-safe",
            "epsilon": "1/2",
            "n": [1, 3],
            "trials": 40,
            "seed": 5,
            "out": csv.to_str().unwrap(),
        })
        .to_string(),
    )
    .unwrap();
    let out = beepsim(&["elect", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("double-safe,1,1/2,"));

    // Unknown keys must be rejected, not ignored.
    fs::write(
        &config,
        serde_json::json!({
            "protocol": "double-safe",
            "epsilon": "1/2",
            "n": [1],
            "trials": 1,
            "seed": 5,
            "cutofff": 99,
        })
        .to_string(),
    )
    .unwrap();
    let out = beepsim(&["elect", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn analyze_emits_exact_and_float_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("analysis.json");
    let out = beepsim(&[
        "analyze", "--algo", "fixed-error", "--n", "2", "--epsilon", "1/2", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["violation"]["exact"], "1/4");
    assert!((doc["violation"]["float"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(doc["protocol"], "fixed-error");
    assert_eq!(doc["truncated"], false);
    let total: f64 = doc["profiles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["float"].as_f64().unwrap())
        .sum();
    assert!((total + 0.25 - 1.0).abs() < 1e-6, "profiles plus violation cover the space");
}
