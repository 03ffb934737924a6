//! End-to-end checks of the binary: exit codes, the oracle's zero-noise
//! instrumentation, and the summary/answer file workflow.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ldpoly")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ldpoly-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn oracle_runs_in_a_clean_process_with_zero_noise_draws() {
    // a dedicated process: the draw counter can only move if oracle code
    // touches a randomizer
    let out = tmp("oracle-erm.json");
    let status = Command::new(bin())
        .args([
            "oracle", "--task", "erm", "--n", "2000", "--seed", "5", "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["noise_draws_delta"], 0);

    for (task, extra) in [("marginals", vec!["--p", "5", "--k", "2"]), ("smooth", vec![])] {
        let out = tmp(&format!("oracle-{task}.json"));
        let mut args = vec![
            "oracle", "--task", task, "--n", "3000", "--seed", "6", "--out",
            out.to_str().unwrap(),
        ];
        args.extend(extra);
        let status = Command::new(bin()).args(&args).status().unwrap();
        assert!(status.success(), "{task}");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report["noise_draws_delta"], 0, "{task}");
    }
}

#[test]
fn marginal_summary_answer_round_trip() {
    let summary_path = tmp("marginals-summary.json");
    let status = Command::new(bin())
        .args([
            "release-marginals", "--p", "4", "--k", "2", "--epsilon", "2.0", "--alpha",
            "0.3", "--n", "20000", "--seed", "11", "--out",
            summary_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let queries_path = tmp("marginal-queries.txt");
    std::fs::write(&queries_path, "1000\n0110\n0000\n").unwrap();
    let answers_path = tmp("marginal-answers.json");
    let status = Command::new(bin())
        .args([
            "answer", "--summary", summary_path.to_str().unwrap(), "--queries",
            queries_path.to_str().unwrap(), "--out", answers_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let answers: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&answers_path).unwrap()).unwrap();
    let arr = answers.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    // the empty disjunction is identically 0; noise is the only deviation
    let empty = arr[2]["answer"].as_f64().unwrap();
    assert!(empty.abs() < 0.3, "{empty}");
}

#[test]
fn smooth_summary_answer_round_trip() {
    let summary_path = tmp("smooth-summary.json");
    let status = Command::new(bin())
        .args([
            "release-smooth", "--p", "1", "--t", "8", "--epsilon", "2.0", "--n", "20000",
            "--seed", "12", "--out", summary_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let queries_path = tmp("smooth-queries.txt");
    std::fs::write(&queries_path, "gauss 0.0 0.5\ngauss 0.2 1.0\n").unwrap();
    let answers_path = tmp("smooth-answers.json");
    let status = Command::new(bin())
        .args([
            "answer", "--summary", summary_path.to_str().unwrap(), "--queries",
            queries_path.to_str().unwrap(), "--out", answers_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let answers: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&answers_path).unwrap()).unwrap();
    assert_eq!(answers.as_array().unwrap().len(), 2);
}

#[test]
fn one_bit_over_budget_fails_cleanly() {
    let status = Command::new(bin())
        .args(["erm-onebit", "--n", "500", "--epsilon", "1.0", "--seed", "1"])
        .output()
        .unwrap();
    assert!(!status.status.success());
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("ln 2"), "{stderr}");
}

#[test]
fn sweep_with_failures_exits_nonzero() {
    let out_csv = tmp("failing-sweep.csv");
    let cfg_path = tmp("failing-sweep.toml");
    std::fs::write(
        &cfg_path,
        format!(
            r#"
mechanism = "partitioned-one-bit"
loss = "squared"
constraint = "box"
p = 1
h = 2
k = 2
n = [256]
epsilon = [2.0]
seeds = [1, 2]
output = "{}"
"#,
            out_csv.display()
        ),
    )
    .unwrap();
    let output = Command::new(bin())
        .args(["sweep", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    // error rows recorded, sweep continued
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.contains("ln 2"));
}

#[test]
fn erm_onebit_within_budget_succeeds() {
    let out = tmp("erm-onebit.json");
    let status = Command::new(bin())
        .args([
            "erm-onebit", "--n", "4000", "--epsilon", "0.5", "--k", "2", "--seed", "3",
            "--out", out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(result["comm"]["total_bits"], 4000);
}

#[test]
fn highdim_subcommand_reports_feasible_recovery() {
    let out = tmp("highdim.json");
    let status = Command::new(bin())
        .args([
            "highdim", "--n", "800", "--p", "40", "--m", "3", "--epsilon", "2.0", "--k",
            "2", "--h", "1", "--seed", "4", "--out", out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(result["feasibility"].as_f64().unwrap() <= 1e-6);
    assert_eq!(result["recovery"], "gauge");
    assert_eq!(result["w_priv"].as_array().unwrap().len(), 40);
}
