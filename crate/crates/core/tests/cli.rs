mod common;

use std::path::Path;
use std::process::{Command, Output};

use erc_kit::pipeline::RunConfig;

use common::*;

fn erc(workspace: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erc")).arg("--workspace").arg(workspace).args(args).output().unwrap()
}

fn ok(workspace: &Path, args: &[&str]) -> String {
    let out = erc(workspace, args);
    assert!(out.status.success(), "erc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--mini", "--seed", "3"]);
    for cmd in ["ingest", "unify", "build-index", "build-prompts"] {
        ok(dir.path(), &[cmd]);
    }
    dir
}

#[test]
fn synth_writes_the_mini_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--mini"]);
    for d in DATASETS {
        let shipped = std::fs::read(fixture_dir("mini").join(format!("{d}.jsonl"))).unwrap();
        let written = std::fs::read(dir.path().join(format!("data/{d}.jsonl"))).unwrap();
        assert!(shipped == written, "{d}");
    }
    let config = RunConfig::load(&dir.path().join("erc.json")).unwrap();
    assert_eq!(config.target, "UIME");
}

#[test]
fn echo_pipeline_scores_one() {
    let dir = prepared();
    ok(dir.path(), &["infer"]);
    let report = ok(dir.path(), &["eval"]);
    assert!(report.contains("W-F1 100.00%"), "{report}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/eval/report.json")).unwrap()).unwrap();
    assert_eq!(json["weighted_f1"], 1.0);
    assert!(dir.path().join("out/eval/report_rows.jsonl").exists());
    let header = std::fs::read_to_string(dir.path().join("out/prompts/test.jsonl")).unwrap();
    assert!(header.lines().next().unwrap().starts_with(r#"{"_header":{"kind":"prompts""#));
}

#[test]
fn eval_fails_when_too_much_is_unparseable() {
    let dir = prepared();
    ok(dir.path(), &["infer"]);
    let path = dir.path().join("out/infer/predictions.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    for line in lines.iter_mut().skip(1).take(10) {
        let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
        v["completion"] = "no idea".into();
        *line = v.to_string();
    }
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = erc(dir.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unparseable"));
}

#[test]
fn stages_report_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--mini"]);
    let out = erc(dir.path(), &["build-prompts"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `unify` first"));
}

#[test]
fn config_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("erc.json"), r#"{"datasets": [], "target": "UIME"}"#).unwrap();
    let out = erc(dir.path(), &["ingest"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn overrides_change_the_config_hash() {
    let dir = prepared();
    let a = ok(dir.path(), &["build-prompts"]);
    let b = ok(dir.path(), &["--window", "5", "build-prompts"]);
    assert_ne!(a.lines().next(), b.lines().next());
    let snapshot = RunConfig::load(&dir.path().join("out/config.json")).unwrap();
    assert_eq!(snapshot.window, 5);
}

#[test]
fn scale_experiment_grid_rows() {
    let dir = prepared();
    ok(dir.path(), &["scale-experiment"]);
    let grid: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/scale/grid.json")).unwrap()).unwrap();
    let rows = grid["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 14 + 7 * 3);
    let subsets = std::fs::read_dir(dir.path().join("out/scale/subsets")).unwrap().count();
    assert_eq!(subsets, rows.len());
}

#[test]
fn sweeps_write_one_row_per_point() {
    let dir = prepared();
    for (kind, points) in [("window", 4), ("alpha", 4), ("pairing", 4)] {
        ok(dir.path(), &["--backend", "mock-rule", "sweep", kind]);
        let rows: Vec<serde_json::Value> = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("out/sweep/{kind}/summary.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(rows.len(), points, "{kind}");
    }
}

#[test]
fn export_train_writes_both_stages() {
    let dir = prepared();
    let out = ok(dir.path(), &["export-train"]);
    assert!(out.contains("stage1 90 records"), "{out}");
    // 90 main + (90 - 9 conversations) impact samples.
    assert!(out.contains("stage2 171 records"), "{out}");
}
