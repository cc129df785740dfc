//! Acceptance suite. Prints one line per criterion and exits non-zero on any failure.
//!
//! Criteria 6 and 7 need the public challenge data. Point `CLICKBAIT_DATA` at a
//! directory holding `dataset1/` and `dataset2/` (each with `instances.jsonl` and
//! `truth.jsonl`), and `CLICKBAIT_GLOVE` at `glove.6B.100d.txt`. Without them
//! those criteria are reported as skipped.

mod common;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clickbait_gru::analytics::{class_counts, median_label_table};
use clickbait_gru::ingest::{find_duplicate_posts, ClassLabel, Judgment, LabeledDataset};
use clickbait_gru::metrics::{evaluate, Confusion, TruthLabels};
use clickbait_gru::nn::{predict, run_direction, DropoutConfig, GruParams, Model};
use clickbait_gru::synthetic::toy_dataset;
use clickbait_gru::text::EmbeddingTable;
use clickbait_gru::train::{fit_examples, grad_check, predict_all, TrainConfig};
use clickbait_gru::EvalReport;

use common::*;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
    /// Fails for a reason recorded in the README; does not fail the run.
    KnownFail(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m: Model<f64> = tiny_model(&mut rng);
        let batch = tiny_batch(&mut rng, 4, 5);
        let report = grad_check(&m, &batch, 1e-4).expect("grad check runs");
        worst = worst.max(report.max_rel_error);
    }
    verdict(
        worst < 1e-4,
        format!("20 tiny models, max relative error {worst:.3e} (< 1e-4)"),
    )
}

/// Plain nested-loop evaluation of the bidirectional GRU and sigmoid head.
mod oracle {
    use clickbait_gru::nn::{GruParams, Model};

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn dense(p: &clickbait_gru::Matrix<f64>) -> Vec<Vec<f64>> {
        (0..p.rows())
            .map(|i| (0..p.cols()).map(|j| p.get(i, j)).collect())
            .collect()
    }

    fn run(p: &GruParams<f64>, xs: &[Vec<f64>]) -> Vec<f64> {
        let (wr, wz, wh) = (dense(&p.w_r), dense(&p.w_z), dense(&p.w_h));
        let (ur, uz, uh) = (dense(&p.u_r), dense(&p.u_z), dense(&p.u_h));
        let h = p.b_r.len();
        let mut state = vec![0.0; h];
        for x in xs {
            let mut next = vec![0.0; h];
            let mut r = vec![0.0; h];
            for i in 0..h {
                let mut a = p.b_r[i];
                for j in 0..x.len() {
                    a += wr[i][j] * x[j];
                }
                for j in 0..h {
                    a += ur[i][j] * state[j];
                }
                r[i] = sig(a);
            }
            for i in 0..h {
                let mut az = p.b_z[i];
                let mut ah = p.b_h[i];
                for j in 0..x.len() {
                    az += wz[i][j] * x[j];
                    ah += wh[i][j] * x[j];
                }
                let mut rec = 0.0;
                for j in 0..h {
                    az += uz[i][j] * state[j];
                    rec += uh[i][j] * state[j];
                }
                let z = sig(az);
                let cand = (ah + r[i] * rec).tanh();
                next[i] = (1.0 - z) * state[i] + z * cand;
            }
            state = next;
        }
        state
    }

    pub fn predict(m: &Model<f64>, ids: &[usize]) -> f64 {
        let xs: Vec<Vec<f64>> = ids.iter().map(|&id| m.embedding.row(id).to_vec()).collect();
        let fwd = run(&m.fwd, &xs);
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bwd = run(&m.bwd, &rev);
        let mut a = m.head.b;
        for (w, s) in m.head.w.iter().zip(fwd.iter().chain(bwd.iter())) {
            a += w * s;
        }
        sig(a)
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m: Model<f64> = tiny_model(&mut rng);
        let len = rng.random_range(1..=8);
        let seq = random_seq(&mut rng, TINY_VOCAB, len, 8);
        let diff = (predict(&m, &seq) - oracle::predict(&m, seq.tokens())).abs();
        worst = worst.max(diff);
    }
    verdict(
        worst <= 1e-10,
        format!("100 tiny instances, max |diff| {worst:.3e} (<= 1e-10)"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h = rng.random_range(1..=6);
        let d = rng.random_range(1..=6);
        let scale = rng.random_range(0.1..20.0);
        let mut p = GruParams::<f64>::zeros(h, d);
        for arr in p.arrays_mut() {
            for v in arr.iter_mut() {
                *v = rng.random_range(-scale..scale);
            }
        }
        let len = rng.random_range(1..=30);
        let xs: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
            .collect();
        for reversed in [false, true] {
            for state in run_direction(&p, &xs, reversed).unwrap() {
                for v in state {
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    verdict(worst <= 1.0, format!("1000 draws, max |state| {worst:.6}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let vocab = 66;
    let mem: Vec<_> = (0..32)
        .map(|i| {
            let len = rng.random_range(2..=5);
            let mut ex = random_seq(&mut rng, vocab, len, 5);
            ex.ids[0] = 2 + 2 * i;
            common::example(ex, rng.random_range(0.0..1.0))
        })
        .collect();
    let emb = EmbeddingTable::<f32>::random(vocab, 16, 4);
    let model = Model::new(emb, 16, DropoutConfig::NONE, 4).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        learning_rate: 5e-3,
        epochs: 500,
        dropout_embed: 0.0,
        dropout_gru_in: 0.0,
        dropout_gru_out: 0.0,
        d: 16,
        h: 16,
        max_len: 5,
        seed: 4,
        ..TrainConfig::default()
    };
    let out = fit_examples(model, &mem, &mem, &cfg).unwrap();
    let reached = out
        .history
        .iter()
        .find(|r| r.train_mse < 0.01)
        .map(|r| r.epoch);
    let best_train = out
        .history
        .iter()
        .map(|r| r.train_mse)
        .fold(f64::INFINITY, f64::min);

    let vocab = 40;
    let train = marker_examples(&mut rng, 600, vocab, 10);
    let valid = marker_examples(&mut rng, 200, vocab, 10);
    let held = marker_examples(&mut rng, 400, vocab, 10);
    let emb = EmbeddingTable::<f32>::random(vocab, 16, 5);
    let model = Model::new(emb, 16, DropoutConfig::default(), 5).unwrap();
    let cfg = TrainConfig {
        batch_size: 16,
        learning_rate: 5e-3,
        epochs: 20,
        d: 16,
        h: 16,
        max_len: 10,
        seed: 5,
        ..TrainConfig::default()
    };
    let out = fit_examples(model, &train, &valid, &cfg).unwrap();
    let seqs: Vec<_> = held.iter().map(|e| e.seq.clone()).collect();
    let preds = predict_all(&out.model, &seqs);
    let correct = preds
        .iter()
        .zip(&held)
        .filter(|(p, e)| (**p >= 0.5) == (e.target >= 0.5))
        .count();
    let acc = correct as f64 / held.len() as f64;

    let ok = reached.is_some() && acc >= 0.95;
    verdict(
        ok,
        format!(
            "memorization train MSE < 0.01 at epoch {} (best {best_train:.5}); marker accuracy {acc:.4} (>= 0.95); {:.1}s",
            reached.map_or("never".to_string(), |e| e.to_string()),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn judgment(mean: f64, class: ClassLabel) -> Judgment {
    Judgment {
        scores: [mean; 5],
        mean,
        median: mean,
        class_label: class,
    }
}

/// Predictions and truth realizing a given confusion table, clickbait positive.
fn realize(c: Confusion) -> (Vec<f64>, Vec<Judgment>) {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for (n, p, t) in [
        (c.tp, 0.9, ClassLabel::Clickbait),
        (c.fp, 0.9, ClassLabel::NoClickbait),
        (c.fn_, 0.1, ClassLabel::Clickbait),
        (c.tn, 0.1, ClassLabel::NoClickbait),
    ] {
        for _ in 0..n {
            preds.push(p);
            truth.push(judgment(if t.is_clickbait() { 1.0 } else { 0.0 }, t));
        }
    }
    (preds, truth)
}

fn check_fixture(c: Confusion, want: [f64; 4], label: &str, detail: &mut String) -> bool {
    let (preds, truth) = realize(c);
    let r = evaluate(&preds, &truth, 0.5, TruthLabels::Class).unwrap();
    let got = [r.precision, r.recall, r.f1, r.accuracy];
    let names = ["precision", "recall", "f1", "accuracy"];
    let mut ok = true;
    let mut bad = Vec::new();
    for i in 0..4 {
        // "exactly": equal up to the last bit of the division
        if (got[i] - want[i]).abs() > 1e-15 {
            ok = false;
            bad.push(format!("{} {:.6} != {:.6}", names[i], got[i], want[i]));
        }
    }
    let _ = write!(
        detail,
        "{label} ({},{},{},{}): {}; ",
        c.tp,
        c.fp,
        c.fn_,
        c.tn,
        if ok { "ok".to_string() } else { bad.join(", ") }
    );
    ok
}

/// The fixture exactly as stated. Its counts give recall 2/3, not 1/2, so it cannot pass.
fn criterion_5a() -> Outcome {
    let mut detail = String::new();
    let ok = check_fixture(
        Confusion {
            tp: 2,
            fp: 1,
            fn_: 1,
            tn: 6,
        },
        [2.0 / 3.0, 0.5, 4.0 / 7.0, 0.8],
        "stated",
        &mut detail,
    );
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::KnownFail(detail + "counts and stated values disagree")
    }
}

fn criterion_5() -> Outcome {
    let mut detail = String::new();
    let derived = check_fixture(
        Confusion {
            tp: 2,
            fp: 1,
            fn_: 1,
            tn: 6,
        },
        [2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 0.8],
        "stated counts",
        &mut detail,
    );
    let stated_values = check_fixture(
        Confusion {
            tp: 2,
            fp: 1,
            fn_: 2,
            tn: 10,
        },
        [2.0 / 3.0, 0.5, 4.0 / 7.0, 0.8],
        "stated values",
        &mut detail,
    );

    let truth: Vec<Judgment> = [0.0, 0.2, 0.4, 0.6, 1.0]
        .iter()
        .map(|&m| {
            judgment(
                m,
                if m >= 0.5 {
                    ClassLabel::Clickbait
                } else {
                    ClassLabel::NoClickbait
                },
            )
        })
        .collect();
    let preds: Vec<f64> = truth.iter().map(|j| j.mean).collect();
    let r = evaluate(&preds, &truth, 0.5, TruthLabels::Class).unwrap();
    let trivial = r.mse.abs() <= 1e-12 && (r.r2 - 1.0).abs() <= 1e-12;
    let _ = write!(detail, "perfect predictions mse {:.1e}, r2 {}", r.mse, r.r2);

    verdict(derived && stated_values && trivial, detail)
}

fn data_root() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("CLICKBAIT_DATA")?);
    let ok = ["dataset1", "dataset2"].iter().all(|d| {
        dir.join(d).join("instances.jsonl").is_file() && dir.join(d).join("truth.jsonl").is_file()
    });
    ok.then_some(dir)
}

fn criterion_6() -> Outcome {
    let Some(root) = data_root() else {
        return Outcome::Skip("CLICKBAIT_DATA not set or incomplete".into());
    };
    let d1 = match LabeledDataset::load_dir(&root.join("dataset1")) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("dataset1: {e}")),
    };
    let d2 = match LabeledDataset::load_dir(&root.join("dataset2")) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("dataset2: {e}")),
    };
    let mut ok = true;
    let mut detail = String::new();
    for (ds, want) in [(&d1, (2495, 762, 1697)), (&d2, (19538, 4761, 14777))] {
        let c = class_counts(ds);
        let got = (c.total, c.clickbait, c.no_clickbait);
        ok &= got == want;
        let _ = write!(detail, "{} counts {got:?} want {want:?}; ", ds.name);
    }
    for ds in [&d1, &d2] {
        let t = median_label_table(ds);
        let empty =
            t[0][ClassLabel::Clickbait.index()] == 0 && t[3][ClassLabel::NoClickbait.index()] == 0;
        ok &= empty;
        let _ = write!(
            detail,
            "{} extreme off-diagonal cells empty: {empty}; ",
            ds.name
        );
    }
    match LabeledDataset::merge("combined", vec![d1.clone(), d2.clone()]) {
        Ok(all) => {
            let dups = find_duplicate_posts(&all).len();
            ok &= dups == 408;
            let _ = write!(detail, "duplicate post texts {dups} want 408; ");
            let max_no = all
                .records
                .iter()
                .filter(|r| r.judgment.class_label == ClassLabel::NoClickbait)
                .map(|r| r.judgment.mean)
                .fold(f64::NEG_INFINITY, f64::max);
            ok &= (max_no - 0.6).abs() <= 1e-6;
            let _ = write!(detail, "max no-clickbait truthMean {max_no:.6} want 0.6");
        }
        Err(e) => {
            ok = false;
            let _ = write!(detail, "merge failed: {e}");
        }
    }
    verdict(ok, detail)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_clickbait")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "clickbait {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn criterion_7() -> Outcome {
    let Some(root) = data_root() else {
        return Outcome::Skip("CLICKBAIT_DATA not set or incomplete".into());
    };
    let Some(glove) = std::env::var_os("CLICKBAIT_GLOVE").map(PathBuf::from) else {
        return Outcome::Skip("CLICKBAIT_GLOVE not set".into());
    };
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let d2 = root.join("dataset2");
    run_cli(&[
        "split",
        "--instances",
        p(&d2.join("instances.jsonl")),
        "--truth",
        p(&d2.join("truth.jsonl")),
        "--out",
        p(&t.join("outer")),
        "--fraction",
        "0.3",
    ]);
    let outer_train = t.join("outer/train");
    run_cli(&[
        "split",
        "--instances",
        p(&outer_train.join("instances.jsonl")),
        "--truth",
        p(&outer_train.join("truth.jsonl")),
        "--out",
        p(&t.join("inner")),
        "--fraction",
        "0.1",
    ]);
    run_cli(&[
        "train",
        "--train",
        p(&t.join("inner/train")),
        "--valid",
        p(&t.join("inner/test")),
        "--glove",
        p(&glove),
        "--out",
        p(&t.join("model")),
    ]);
    let test = t.join("outer/test");
    run_cli(&[
        "predict",
        "--checkpoint",
        p(&t.join("model/model.json")),
        "--instances",
        p(&test.join("instances.jsonl")),
        "--out",
        p(&t.join("results.jsonl")),
    ]);
    run_cli(&[
        "evaluate",
        "--results",
        p(&t.join("results.jsonl")),
        "--truth",
        p(&test.join("truth.jsonl")),
        "--out",
        p(&t.join("report.json")),
    ]);
    let report: EvalReport =
        serde_json::from_slice(&std::fs::read(t.join("report.json")).unwrap()).unwrap();
    verdict(
        report.mse <= 0.040,
        format!(
            "held-out 30% MSE {:.5} (<= 0.040), {:.0}s",
            report.mse,
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Runs the full pipeline into `dir` and returns every artifact's bytes.
fn pipeline(dir: &Path, data: &Path) -> Vec<(String, Vec<u8>)> {
    run_cli(&[
        "analyze",
        "--instances",
        p(&data.join("instances.jsonl")),
        "--truth",
        p(&data.join("truth.jsonl")),
        "--out",
        p(&dir.join("analysis")),
    ]);
    run_cli(&[
        "split",
        "--instances",
        p(&data.join("instances.jsonl")),
        "--truth",
        p(&data.join("truth.jsonl")),
        "--out",
        p(&dir.join("split")),
        "--seed",
        "7",
    ]);
    run_cli(&[
        "train",
        "--train",
        p(&dir.join("split/train")),
        "--valid",
        p(&dir.join("split/test")),
        "--out",
        p(&dir.join("model")),
        "--dim",
        "8",
        "--hidden",
        "6",
        "--epochs",
        "3",
        "--batch",
        "16",
        "--seed",
        "7",
    ]);
    run_cli(&[
        "predict",
        "--checkpoint",
        p(&dir.join("model/model.json")),
        "--instances",
        p(&dir.join("split/test/instances.jsonl")),
        "--out",
        p(&dir.join("results.jsonl")),
    ]);
    run_cli(&[
        "evaluate",
        "--results",
        p(&dir.join("results.jsonl")),
        "--truth",
        p(&dir.join("split/test/truth.jsonl")),
        "--out",
        p(&dir.join("report.json")),
    ]);
    let mut files = Vec::new();
    collect(dir, dir, &mut files);
    files.sort();
    files
        .into_iter()
        .map(|(name, bytes)| {
            if name == "report.json" {
                // wall-clock runtime is the only non-reproducible field
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v["runtime_seconds"] = serde_json::json!(0.0);
                (name, serde_json::to_vec(&v).unwrap())
            } else {
                (name, bytes)
            }
        })
        .collect()
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, out);
        } else {
            let name = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            out.push((name, std::fs::read(&path).unwrap()));
        }
    }
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    toy_dataset(300, 8).write_dir(&data).unwrap();
    let a = pipeline(&tmp.path().join("a"), &data);
    let b = pipeline(&tmp.path().join("b"), &data);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let ok = a.len() == b.len() && differing.is_empty() && a.len() >= 14;
    verdict(
        ok,
        format!(
            "{} artifacts from analyze/split/train/predict/evaluate compared, {} differ {:?}",
            names.len(),
            differing.len(),
            differing
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria by number.
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 gradient correctness", criterion_1),
        ("2 forward-pass oracle", criterion_2),
        ("3 bounded state", criterion_3),
        ("4 trainability", criterion_4),
        ("5 metrics oracle", criterion_5),
        ("5 metrics oracle, stated fixture as written", criterion_5a),
        ("6 dataset statistics", criterion_6),
        ("7 held-out MSE", criterion_7),
        ("8 determinism", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let line = match f() {
            Outcome::Pass(d) => format!("PASS  criterion {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                format!("FAIL  criterion {name}: {d}")
            }
            Outcome::Skip(d) => format!("SKIP  criterion {name}: {d}"),
            Outcome::KnownFail(d) => format!("FAIL  criterion {name}: {d} (known, see README)"),
        };
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
