use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-debate"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"{
  "max_rounds": 3,
  "seed": 1,
  "roster": [
    {"id": "a1", "n_params": 7e9, "m_tokens": 2e12,
     "backend": {"kind": "scripted", "behavior": {"mode": "copy_majority", "initial": "12", "confidences": [0.9]}}},
    {"id": "a2", "n_params": 13e9, "m_tokens": 2e12,
     "backend": {"kind": "scripted", "behavior": {"mode": "fixed_sequence", "steps": [{"answer": "11", "confidence": 0.6}, {"answer": "12", "confidence": 0.8}]}}},
    {"id": "a3", "n_params": 70e9, "m_tokens": 2e12,
     "backend": {"kind": "scripted", "behavior": {"mode": "stubborn", "answer": "12", "confidence": 0.95}}}
  ]
}"#;

fn write_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let config = dir.join("config.json");
    fs::write(&config, CONFIG).unwrap();
    let dataset = dir.join("arith.jsonl");
    let lines: String = (0..6)
        .map(|i| format!("{{\"id\":\"q{i}\",\"question\":\"What is {i} + 12 - {i}?\",\"gold\":\"12\",\"task_kind\":\"numeric\"}}\n"))
        .collect();
    fs::write(&dataset, lines + "{\"id\":\"broken\"}\n").unwrap();
    (config, dataset)
}

#[test]
fn simulate_prints_the_divergence_transcript() {
    let out = ok(bin().args(["simulate", "--scenario"]).arg(repo_file("scenarios/divergence.json")).output().unwrap());
    let t: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(t["final_outcome"]["answer"], "a");
    assert_eq!(t["final_outcome"]["supporters"], 4);
    assert_eq!(t["rounds_used"], 5);
}

#[test]
fn simulate_refuses_remote_agents() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario: Value = serde_json::from_str(&fs::read_to_string(repo_file("configs/remote-example.json")).unwrap()).unwrap();
    scenario["questions"] = serde_json::json!([{"id": "x", "question": "?"}]);
    let path = dir.path().join("remote.json");
    fs::write(&path, scenario.to_string()).unwrap();
    let out = bin().args(["simulate", "--scenario"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scripted agents only"));
}

#[test]
fn run_then_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (config, dataset) = write_inputs(dir.path());
    let out_dir = dir.path().join("out");

    let strict = bin()
        .args(["run", "--strict", "--dataset"])
        .arg(&dataset)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(!strict.status.success());

    let stdout = ok(bin()
        .args(["run", "--parallel", "3", "--dataset"])
        .arg(&dataset)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("RA                 100.00%"), "{stdout}");
    assert!(out_dir.join("arith/q0.json").exists());
    assert!(out_dir.join("arith.report.rounds.csv").exists());

    let recomputed = dir.path().join("again.json");
    ok(bin()
        .args(["report", "--transcripts"])
        .arg(out_dir.join("arith"))
        .arg("--out")
        .arg(&recomputed)
        .output()
        .unwrap());
    let mut a: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("arith.report.json")).unwrap()).unwrap();
    let mut b: Value = serde_json::from_str(&fs::read_to_string(&recomputed).unwrap()).unwrap();
    for v in [&mut a, &mut b] {
        v.as_object_mut().unwrap().remove("wall_time_s");
    }
    assert_eq!(a, b);
    assert!(fs::read_to_string(dir.path().join("again.summary.csv")).unwrap().contains("questions,6"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = write_inputs(dir.path());
    let config = dir.path().join("bad.json");
    fs::write(&config, CONFIG.replace("\"max_rounds\": 3,", "\"pruning\": \"bot_k\", \"k\": 2,")).unwrap();
    let out = bin()
        .args(["run", "--dataset"])
        .arg(&dataset)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid config"));
}
