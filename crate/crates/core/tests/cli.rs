use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clickbait_gru::analytics::ANALYSIS_FILES;
use clickbait_gru::cli::ResultLine;
use clickbait_gru::ingest::LabeledDataset;
use clickbait_gru::synthetic::toy_dataset;
use clickbait_gru::EvalReport;

fn clickbait(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clickbait"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = clickbait(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn toy_dir(root: &Path, n: usize) -> std::path::PathBuf {
    let dir = root.join("toy");
    toy_dataset(n, 11).write_dir(&dir).unwrap();
    dir
}

#[test]
fn full_pipeline_writes_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = toy_dir(t, 200);
    let inst = data.join("instances.jsonl");
    let truth = data.join("truth.jsonl");

    ok(&[
        "analyze",
        "--instances",
        s(&inst),
        "--truth",
        s(&truth),
        "--out",
        s(&t.join("an")),
    ]);
    for f in ANALYSIS_FILES {
        assert!(t.join("an").join(f).is_file(), "missing {f}");
    }
    let counts: serde_json::Value =
        serde_json::from_slice(&fs::read(t.join("an/counts.json")).unwrap()).unwrap();
    assert_eq!(counts["total"], 200);

    ok(&[
        "split",
        "--instances",
        s(&inst),
        "--truth",
        s(&truth),
        "--out",
        s(&t.join("sp")),
    ]);
    let train = LabeledDataset::load_dir(&t.join("sp/train")).unwrap();
    let test = LabeledDataset::load_dir(&t.join("sp/test")).unwrap();
    assert_eq!(test.len(), 60);
    assert_eq!(train.len(), 140);

    ok(&[
        "train",
        "--train",
        s(&t.join("sp/train")),
        "--valid",
        s(&t.join("sp/test")),
        "--out",
        s(&t.join("m")),
        "--dim",
        "6",
        "--hidden",
        "4",
        "--epochs",
        "2",
    ]);
    let history = fs::read_to_string(t.join("m/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 3);
    assert!(history.starts_with("epoch,train_mse,valid_mse\n"));

    ok(&[
        "predict",
        "--checkpoint",
        s(&t.join("m/model.json")),
        "--instances",
        s(&t.join("sp/test/instances.jsonl")),
        "--out",
        s(&t.join("res.jsonl")),
    ]);
    let results: Vec<ResultLine> = fs::read_to_string(t.join("res.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(results.len(), 60);
    assert!(results
        .iter()
        .all(|r| r.clickbait_score > 0.0 && r.clickbait_score < 1.0));
    assert_eq!(results[0].id, test.records[0].post.id);

    let out = ok(&[
        "evaluate",
        "--results",
        s(&t.join("res.jsonl")),
        "--truth",
        s(&t.join("sp/test/truth.jsonl")),
        "--out",
        s(&t.join("report.json")),
    ]);
    let report: EvalReport =
        serde_json::from_slice(&fs::read(t.join("report.json")).unwrap()).unwrap();
    assert!(report.mse >= 0.0 && report.mse < 1.0);
    let printed: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed.mse, report.mse);
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = toy_dir(t, 60);
    fs::write(
        t.join("cfg.toml"),
        "d = 5\nh = 3\nepochs = 4\nbatch_size = 8\n",
    )
    .unwrap();
    ok(&[
        "train",
        "--train",
        s(&data),
        "--valid",
        s(&data),
        "--out",
        s(&t.join("m")),
        "--config",
        s(&t.join("cfg.toml")),
        "--epochs",
        "1",
    ]);
    let history = fs::read_to_string(t.join("m/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2);
    let ck: serde_json::Value =
        serde_json::from_slice(&fs::read(t.join("m/model.json")).unwrap()).unwrap();
    assert_eq!(ck["model"]["head"]["w"].as_array().unwrap().len(), 6);

    fs::write(t.join("bad.toml"), "hidden_size = 3\n").unwrap();
    let out = clickbait(&[
        "train",
        "--train",
        s(&data),
        "--valid",
        s(&data),
        "--out",
        s(&t.join("m2")),
        "--config",
        s(&t.join("bad.toml")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = toy_dir(t, 40);

    assert_eq!(clickbait(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        clickbait(&["split", "--instances", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(clickbait(&["--help"]).status.code(), Some(0));

    let missing = t.join("nope.jsonl");
    let out = clickbait(&[
        "split",
        "--instances",
        s(&missing),
        "--truth",
        s(&missing),
        "--out",
        s(t),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = clickbait(&[
        "split",
        "--instances",
        s(&data.join("instances.jsonl")),
        "--truth",
        s(&data.join("truth.jsonl")),
        "--out",
        s(&t.join("sp")),
        "--fraction",
        "1.5",
    ]);
    assert_ne!(out.status.code(), Some(0));

    fs::write(
        t.join("bad_truth.jsonl"),
        "{\"id\": \"1\", \"truthJudgments\": [0.5]}\n",
    )
    .unwrap();
    let out = clickbait(&[
        "analyze",
        "--instances",
        s(&data.join("instances.jsonl")),
        "--truth",
        s(&t.join("bad_truth.jsonl")),
        "--out",
        s(&t.join("an")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = clickbait(&[
        "train",
        "--train",
        s(&data),
        "--valid",
        s(&data),
        "--out",
        s(&t.join("m")),
        "--dim",
        "4",
        "--hidden",
        "3",
        "--epochs",
        "3",
        "--lr",
        "1e30",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!t.join("m/model.json").exists());
}

#[test]
fn evaluate_rejects_unmatched_results() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = toy_dir(t, 10);
    fs::write(
        t.join("res.jsonl"),
        "{\"id\": \"1\", \"clickbaitScore\": 0.3}\n",
    )
    .unwrap();
    let out = clickbait(&[
        "evaluate",
        "--results",
        s(&t.join("res.jsonl")),
        "--truth",
        s(&data.join("truth.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
