use std::path::Path;
use std::process::{Command, Output};

fn cfpilot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfpilot")).args(args).output().unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    let cfg = serde_json::json!({
        "radio": {"num_pilots": 3},
        "topology": {"num_aps": 20, "num_ues": 6},
        "solver": {"ims": {"iterations": 40}},
        "experiment": {"name": "small", "schemes": ["random", "ims-es", "ideal"], "drops": 2}
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let res = cfpilot(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--deterministic",
        "--seed",
        "7",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = json(&res.stdout);
    assert_eq!(report["status"], "ok");
    assert_eq!(report["runs"][0]["samples"], 2 * 6 * 3);
    let samples = std::fs::read_to_string(out.join("small_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 2 * 6 * 3);
    assert!(out.join("small_summary.csv").exists());
    assert!(out.join("small.json").exists());
}

#[test]
fn overrides_and_channel_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let dump = dir.path().join("dump");
    std::fs::create_dir_all(&dump).unwrap();
    let res = cfpilot(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--set",
        "topology.num_ues=4",
        "--set",
        "drops=1",
        "--dump-channels",
        dump.to_str().unwrap(),
        "--deterministic",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&res.stdout)["runs"][0]["samples"], 4 * 3);
    let beta = std::fs::read_to_string(dump.join("small_beta.csv")).unwrap();
    assert_eq!(beta.lines().count(), 20);
    assert_eq!(beta.lines().next().unwrap().split(',').count(), 4);
    assert!(dump.join("small_gamma_ims-es.csv").exists());
}

#[test]
fn errors_are_machine_readable() {
    let res = cfpilot(&["run"]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(json(&res.stderr)["error"], "config");

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let res = cfpilot(&[
        "run",
        "--config",
        &cfg,
        "--set",
        "radio.num_pilots=0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(json(&res.stderr)["message"].as_str().unwrap().contains("num_pilots"));

    let res = cfpilot(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(json(&res.stderr)["error"], "io");
}

#[test]
fn validate_passes() {
    let res = cfpilot(&["validate", "--seed", "3"]);
    assert!(res.status.success());
    let report = json(&res.stdout);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn preset_accepts_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = cfpilot(&[
        "fig7",
        "--out",
        out,
        "--drops",
        "1",
        "--deterministic",
        "--set",
        "solver.ims.iterations=20",
        "--set",
        "topology.num_aps=20",
        "--set",
        "topology.num_ues=10",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = std::fs::read_to_string(dir.path().join("fig7_summary.csv")).unwrap();
    for source in ["location", "lsf", "both"] {
        assert!(summary.contains(&format!("ims-vs,{source},ul_mean_bps")), "{summary}");
    }
}
