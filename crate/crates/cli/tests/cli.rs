// SPDX-License-Identifier: Apache-2.0

use std::process::Command;

fn peerlearn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peerlearn"))
}

#[test]
fn small_confidence_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = peerlearn()
        .args(["confidence-sweep", "--n", "30", "--instances", "2", "--epsilon", "0,1", "--threads", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert!(lines.next().unwrap().starts_with("experiment,seed,n,p,epsilon,method,agent_id"));
    assert!(text.contains("mp_confidence"));
}

#[test]
fn json_goes_to_stdout_without_out() {
    let output = peerlearn()
        .args(["confidence-sweep", "--n", "20", "--instances", "1", "--epsilon", "0.5", "--format", "json", "--threads", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let value: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(value["rows"].as_array().is_some_and(|rows| !rows.is_empty()));
    assert_eq!(value["config"]["n"], 20);
}

#[test]
fn invalid_alpha_fails_with_diagnostic() {
    let output = peerlearn().args(["confidence-sweep", "--alpha", "1.5"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_is_rejected() {
    let output = peerlearn().args(["scalability", "--bogus"]).output().unwrap();
    assert!(!output.status.success());
    assert!(!output.stderr.is_empty());
}
