use std::path::Path;
use std::process::{Command, Output};

const SENDER_REPLY: &str = include_str!("../../core/tests/fixtures/sender_reply.txt");
const RECEIVER_REPLY: &str = include_str!("../../core/tests/fixtures/receiver_reply.txt");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infobargain"))
        .args(args)
        .env_remove("INFOBARGAIN_API_KEY")
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_grading() {
    let text = stdout(&["solve"]);
    assert!(text.starts_with("sender value 0.666667\nreceiver value 0.000000\n"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&["--format", "json", "solve"])).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["ic"]["obedient"], true);
}

#[test]
fn bargaining_solvers() {
    assert_eq!(stdout(&["bargain", "--rubinstein", "--delta", "0.9", "0.9"]), "0.526316 / 0.473684\n");
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["--format", "json", "bargain", "--ultimatum", "--pie", "100", "--unit", "1"]))
            .unwrap();
    assert_eq!(v["payoffs"], serde_json::json!([99.0, 1.0]));
}

#[test]
fn nash_reduction_is_honest() {
    let text = stdout(&["reduce", "--build", "curve"]);
    assert!(text.contains("nash on points 0.333333 0.333333"), "{text}");
}

#[test]
fn experiment_records_feed_report() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    let text = stdout(&["experiment", "--id", "54", "--records", path(&records)]);
    assert!(text.contains("Bargaining-54") && text.contains("consensus rate 1.00"), "{text}");
    assert_eq!(stdout(&["report", "--records", path(&records)]), text);

    let csv = stdout(&["--format", "csv", "experiment", "--id", "54"]);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("id,label,runs,failures,consensus_rate"));
    assert!(lines.next().unwrap().starts_with("54,Bargaining-54,12,0,1,"));
}

#[test]
fn grid_correlation_report() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("all.jsonl");
    stdout(&["experiment", "--runs", "2", "--records", path(&records)]);
    let text = stdout(&["report", "--records", path(&records)]);
    let line = text.lines().last().unwrap();
    let r: f64 = line.strip_prefix("r vs ground truth = ").unwrap()[..6].parse().unwrap();
    assert!(r > 0.95, "{line}");
}

#[test]
fn mock_run_replays_from_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let replies = dir.path().join("replies.json");
    std::fs::write(&replies, serde_json::to_string(&[[SENDER_REPLY], [RECEIVER_REPLY]]).unwrap()).unwrap();
    let trace = dir.path().join("trace.jsonl");
    let common = ["--seed", "11"];
    let sim = ["simulate", "--roles", "alternating", "--first", "0", "--realization-steps", "100"];
    let mock: Vec<&str> = ["--backend", "mock", "--mock-replies", path(&replies)]
        .into_iter()
        .chain(common)
        .chain(sim)
        .chain(["--trace", path(&trace)])
        .collect();
    let first = stdout(&mock);
    assert!(first.starts_with("consensus true\ndeal timestep 1\n"), "{first}");

    let replay: Vec<&str> = ["--backend", "replay", "--replay", path(&trace)].into_iter().chain(common).chain(sim).collect();
    assert_eq!(stdout(&replay), first);
}

#[test]
fn missing_inputs_are_errors() {
    let out = run(&["--backend", "mock", "simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--mock-replies"));
    assert!(!run(&["experiment", "--id", "999"]).status.success());
    assert!(!run(&["bargain", "--rubinstein", "--delta", "1", "1"]).status.success());
}
