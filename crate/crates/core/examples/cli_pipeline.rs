//! The `clickbait` command pipeline run in-process on generated data.

use clickbait_gru::cli;
use clickbait_gru::synthetic::toy_dataset;

fn step(args: &[&str]) {
    println!("$ clickbait {}", args.join(" "));
    let code = cli::run(std::iter::once("clickbait").chain(args.iter().copied()));
    assert_eq!(code, 0, "command failed");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let root = tmp.path();
    let p = |rel: &str| root.join(rel).to_string_lossy().into_owned();
    toy_dataset(400, 5).write_dir(&root.join("data"))?;

    step(&[
        "analyze",
        "--instances",
        &p("data/instances.jsonl"),
        "--truth",
        &p("data/truth.jsonl"),
        "--out",
        &p("analysis"),
    ]);
    step(&[
        "split",
        "--instances",
        &p("data/instances.jsonl"),
        "--truth",
        &p("data/truth.jsonl"),
        "--out",
        &p("split"),
    ]);
    step(&[
        "train",
        "--train",
        &p("split/train"),
        "--valid",
        &p("split/test"),
        "--out",
        &p("model"),
        "--dim",
        "16",
        "--hidden",
        "16",
        "--epochs",
        "5",
        "--lr",
        "0.005",
    ]);
    step(&[
        "predict",
        "--checkpoint",
        &p("model/model.json"),
        "--instances",
        &p("split/test/instances.jsonl"),
        "--out",
        &p("results.jsonl"),
    ]);
    step(&[
        "evaluate",
        "--results",
        &p("results.jsonl"),
        "--truth",
        &p("split/test/truth.jsonl"),
    ]);
    Ok(())
}
