use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn jobshop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jobshop")).args(args).output().unwrap()
}

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario_file(dir: &Path) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, "breakdowns_enabled = true\narrivals_enabled = true\nseed = 3\n").unwrap();
    p
}

#[test]
fn bench_gantt_validate_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path());
    let out = dir.path().join("bench");
    let summary = ok_json(jobshop(&[
        "bench",
        "--instance",
        s(&data("small/fixture_5x4.json")),
        "--scenario",
        s(&sc),
        "--algos",
        "rules",
        "--seeds",
        s(&data("seeds.txt")),
        "--runs",
        "5",
        "--out",
        s(&out),
    ]));
    assert_eq!(summary["mean_makespan"].as_object().unwrap().len(), 12);
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("instance,FIFO,SPT,"));
    assert_eq!(csv.lines().count(), 2);
    let results: Value = serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(results[0]["runs"], 5);

    let run = out.join("runs/SPT_run0.json");
    let svg = dir.path().join("g.svg");
    let gcsv = dir.path().join("g.csv");
    assert!(jobshop(&["gantt", "--run-json", s(&run), "--out", s(&svg)]).status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(jobshop(&["gantt", "--run-json", s(&run), "--out", s(&gcsv)]).status.success());
    assert!(std::fs::read_to_string(&gcsv).unwrap().lines().count() > 1);

    // the record carries its scenario; validate against it
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&run).unwrap()).unwrap();
    let trace_path = dir.path().join("trace.json");
    std::fs::write(&trace_path, rec["scenario"].to_string()).unwrap();
    let inst = data("small/fixture_5x4.json");
    let v = ok_json(jobshop(&["validate", "--trace", s(&run), "--instance", s(&inst), "--scenario", s(&trace_path)]));
    assert_eq!(v["valid"], true);
    assert_eq!(v["makespan"], rec["makespan"]);

    let mut bad = rec["schedule"].clone();
    let first = &mut bad[0];
    first["start"] = (first["start"].as_u64().unwrap() + 1).into();
    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, bad.to_string()).unwrap();
    let o = jobshop(&["validate", "--trace", s(&bad_path), "--instance", s(&inst), "--scenario", s(&trace_path)]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn train_then_evaluate_and_bench_agent() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario_file(dir.path());
    let cfg = dir.path().join("train.toml");
    std::fs::write(
        &cfg,
        "total_steps = 512\nrollout_length = 256\nminibatch_size = 64\nepochs_per_update = 2\nhidden = [16, 16]\neval_runs = 2\n",
    )
    .unwrap();
    let inst = data("small/fixture_3x3.json");
    let train_dir = dir.path().join("train");
    let t = ok_json(jobshop(&[
        "train",
        "--instance",
        s(&inst),
        "--scenario",
        s(&sc),
        "--config",
        s(&cfg),
        "--out",
        s(&train_dir),
        "--seed",
        "11",
    ]));
    assert_eq!(t["steps"], 512);
    assert_eq!(t["iterations"], 2);
    let log = std::fs::read_to_string(train_dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let ckpt = train_dir.join("final.json");
    assert!(train_dir.join("best.json").exists());

    let e = ok_json(jobshop(&[
        "evaluate",
        "--instance",
        s(&inst),
        "--scenario",
        s(&sc),
        "--checkpoint",
        s(&ckpt),
        "--seeds",
        s(&data("seeds.txt")),
        "--runs",
        "4",
        "--out",
        s(&dir.path().join("eval")),
    ]));
    assert!(e["mean"].as_f64().unwrap() > 0.0);

    let b = ok_json(jobshop(&[
        "bench",
        "--instance",
        s(&inst),
        "--scenario",
        s(&sc),
        "--algos",
        &format!("rules,agent:{}", ckpt.display()),
        "--seeds",
        s(&data("seeds.txt")),
        "--runs",
        "4",
        "--out",
        s(&dir.path().join("bench")),
    ]));
    assert!(b["table"]["gap_pct"].is_number());
    assert!(dir.path().join("bench/runs/agent_run0.json").exists());
}

#[test]
fn failures_report_json_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let o = jobshop(&[
        "bench",
        "--instance",
        s(&dir.path().join("missing.txt")),
        "--scenario",
        s(&scenario_file(dir.path())),
        "--seeds",
        s(&data("seeds.txt")),
        "--out",
        s(dir.path()),
    ]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("missing.txt"));

    let o = jobshop(&[
        "bench",
        "--instance",
        s(&data("small/fixture_3x3.json")),
        "--scenario",
        s(&scenario_file(dir.path())),
        "--algos",
        "EDD",
        "--seeds",
        s(&data("seeds.txt")),
        "--out",
        s(dir.path()),
    ]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("EDD"));
}
