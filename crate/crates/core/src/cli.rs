//! Command-line front end: `analyze`, `split`, `train`, `predict`, `evaluate`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, AnalyzeOptions};
use crate::checkpoint::Checkpoint;
use crate::ingest::{self, LabeledDataset, TextField};
use crate::metrics::{self, EvalReport, TruthLabels};
use crate::text::{self, EmbeddingTable, Vocabulary};
use crate::train::{self, TrainConfig, TrainError};

pub const CHECKPOINT_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::NonFinite { .. } | TrainError::ValidationNonFinite { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "clickbait",
    version,
    about = "Bidirectional GRU clickbait scorer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Dataset statistics: class counts, median/label table, score and length histograms, duplicates.
    Analyze(AnalyzeArgs),
    /// Stratified train/test split into two dataset directories.
    Split(SplitArgs),
    /// Train a model and write the best-validation checkpoint plus history.
    Train(TrainArgs),
    /// Score instances with a checkpoint.
    Predict(PredictArgs),
    /// Compare scored results against a truth file.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Instances file; repeat together with --truth to combine datasets.
    #[arg(long, required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub truth: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of truthMean histogram bins over [0, 1].
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Post-length histogram bin width, in characters.
    #[arg(long, default_value_t = 10)]
    pub length_bin: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Writes `<out>/train` and `<out>/test`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding instances.jsonl and truth.jsonl.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    /// GloVe text vectors; without it embeddings start uniform random.
    #[arg(long)]
    pub glove: Option<PathBuf>,
    /// Output directory for model.json and history.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with training settings; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dropout_embed: Option<f64>,
    #[arg(long)]
    pub dropout_in: Option<f64>,
    #[arg(long)]
    pub dropout_out: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub text_field: Option<TextField>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    /// Results JSONL, one {"id", "clickbaitScore"} object per instance.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Source of the true binary labels.
    #[arg(long, value_enum, default_value_t = TruthLabels::Class)]
    pub labels: TruthLabels,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
    }
}

fn load_dataset(instances: &Path, truth: &Path) -> Result<LabeledDataset, CliError> {
    let ds = LabeledDataset::load_files(instances, truth).map_err(data(format!(
        "{} / {}",
        instances.display(),
        truth.display()
    )))?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{}: no records", truth.display())));
    }
    Ok(ds)
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    if a.instances.len() != a.truth.len() {
        return Err(CliError::Usage(
            "--instances and --truth must be given the same number of times".into(),
        ));
    }
    if a.bins < 2 || a.length_bin == 0 {
        return Err(CliError::Usage(
            "--bins must be >= 2 and --length-bin >= 1".into(),
        ));
    }
    let parts = a
        .instances
        .iter()
        .zip(&a.truth)
        .map(|(i, t)| load_dataset(i, t))
        .collect::<Result<Vec<_>, _>>()?;
    let ds = LabeledDataset::merge("combined", parts).map_err(data("merging datasets"))?;
    let opts = AnalyzeOptions {
        score_bins: a.bins,
        length_bin_width: a.length_bin,
    };
    analytics::write_analysis(&ds, &a.out, opts).map_err(data(a.out.display()))?;
    let c = analytics::class_counts(&ds);
    println!(
        "{} records ({} clickbait, {} no-clickbait) -> {}",
        c.total,
        c.clickbait,
        c.no_clickbait,
        a.out.display()
    );
    Ok(())
}

pub fn cmd_split(a: &SplitArgs) -> Result<(), CliError> {
    if !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--fraction {} must lie strictly between 0 and 1",
            a.fraction
        )));
    }
    let ds = load_dataset(&a.instances, &a.truth)?;
    let (train, test) = ingest::stratified_split(&ds, a.fraction, a.seed).map_err(data("split"))?;
    for (name, part) in [("train", &train), ("test", &test)] {
        let dir = a.out.join(name);
        part.write_dir(&dir).map_err(data(dir.display()))?;
    }
    println!(
        "train {} / test {} -> {}",
        train.len(),
        test.len(),
        a.out.display()
    );
    Ok(())
}

/// Merges defaults, the optional TOML file and explicit flags, in that order.
pub fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(data(path.display()))?;
            toml::from_str::<TrainConfig>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! apply {
        ($flag:ident => $field:ident) => {
            if let Some(v) = a.$flag {
                cfg.$field = v;
            }
        };
    }
    apply!(dim => d);
    apply!(hidden => h);
    apply!(batch => batch_size);
    apply!(lr => learning_rate);
    apply!(epochs => epochs);
    apply!(dropout_embed => dropout_embed);
    apply!(dropout_in => dropout_gru_in);
    apply!(dropout_out => dropout_gru_out);
    apply!(max_len => max_len);
    apply!(min_count => min_count);
    apply!(seed => seed);
    apply!(text_field => text_field);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub valid_mse: f64,
    pub vocabulary: usize,
    pub glove_matched: Option<usize>,
}

pub fn cmd_train(a: &TrainArgs) -> Result<TrainSummary, CliError> {
    let cfg = resolve_train_config(a)?;
    let train_ds = LabeledDataset::load_dir(&a.train).map_err(data(a.train.display()))?;
    let valid_ds = LabeledDataset::load_dir(&a.valid).map_err(data(a.valid.display()))?;
    if train_ds.is_empty() || valid_ds.is_empty() {
        return Err(CliError::Data(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let corpus: Vec<Vec<String>> = train_ds
        .records
        .iter()
        .map(|r| text::tokenize(&r.post.text(cfg.text_field)))
        .collect();
    let vocab =
        Vocabulary::build(&corpus, cfg.min_count).map_err(|e| CliError::Usage(e.to_string()))?;
    let (embeddings, glove_matched) = match &a.glove {
        Some(path) => {
            let f = ingest::open(path).map_err(data(path.display()))?;
            let load = text::load_glove::<f32, _>(f, &vocab, cfg.d, cfg.seed)
                .map_err(data(path.display()))?;
            (load.table, Some(load.matched))
        }
        None => (EmbeddingTable::random(vocab.len(), cfg.d, cfg.seed), None),
    };
    let outcome = train::fit(&train_ds, &valid_ds, &cfg, &vocab, embeddings)?;

    fs::create_dir_all(&a.out).map_err(data(a.out.display()))?;
    let ck = Checkpoint {
        text_field: cfg.text_field,
        max_len: cfg.max_len,
        vocab,
        model: outcome.model.clone(),
    };
    let ck_path = a.out.join(CHECKPOINT_FILE);
    ck.save(&ck_path).map_err(data(ck_path.display()))?;
    let hist_path = a.out.join(HISTORY_FILE);
    let f = File::create(&hist_path).map_err(data(hist_path.display()))?;
    train::write_history(f, &outcome.history).map_err(data(hist_path.display()))?;

    let best = *outcome.best();
    println!(
        "best epoch {} of {}: validation MSE {:.6}",
        best.epoch, cfg.epochs, best.valid_mse
    );
    Ok(TrainSummary {
        best_epoch: best.epoch,
        valid_mse: best.valid_mse,
        vocabulary: ck.vocab.len(),
        glove_matched,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultLine {
    pub id: String,
    pub clickbait_score: f64,
}

pub fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let ck = Checkpoint::<f32>::load(&a.checkpoint).map_err(data(a.checkpoint.display()))?;
    let posts =
        ingest::parse_instances(ingest::open(&a.instances).map_err(data(a.instances.display()))?)
            .map_err(data(a.instances.display()))?;
    let seqs: Vec<_> = posts
        .iter()
        .map(|p| {
            text::encode(
                &text::tokenize(&p.text(ck.text_field)),
                &ck.vocab,
                ck.max_len,
            )
        })
        .collect();
    let scores = train::predict_all(&ck.model, &seqs);
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(CliError::Numeric(format!(
            "non-finite score for id {}",
            posts[i].id
        )));
    }
    let f = File::create(&a.out).map_err(data(a.out.display()))?;
    let mut w = BufWriter::new(f);
    for (p, s) in posts.iter().zip(&scores) {
        let line = ResultLine {
            id: p.id.clone(),
            clickbait_score: *s,
        };
        serde_json::to_writer(&mut w, &line).map_err(data(a.out.display()))?;
        w.write_all(b"\n").map_err(data(a.out.display()))?;
    }
    w.flush().map_err(data(a.out.display()))?;
    println!("scored {} instances -> {}", posts.len(), a.out.display());
    Ok(())
}

pub fn parse_results<R: BufRead>(r: R) -> Result<Vec<ResultLine>, CliError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(data("results"))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ResultLine =
            serde_json::from_str(&line).map_err(data(format!("results line {}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<EvalReport, CliError> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(CliError::Usage(format!(
            "--threshold {} must lie strictly between 0 and 1",
            a.threshold
        )));
    }
    let results = parse_results(ingest::open(&a.results).map_err(data(a.results.display()))?)?;
    let truth = ingest::parse_truth(ingest::open(&a.truth).map_err(data(a.truth.display()))?)
        .map_err(data(a.truth.display()))?;
    let scores: HashMap<&str, f64> = results
        .iter()
        .map(|r| (r.id.as_str(), r.clickbait_score))
        .collect();
    let missing: Vec<&str> = truth
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !scores.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "{} truth ids missing from results: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let preds: Vec<f64> = truth.iter().map(|(id, _)| scores[id.as_str()]).collect();
    let judgments: Vec<_> = truth.into_iter().map(|(_, j)| j).collect();

    let started = Instant::now();
    let mut report = metrics::evaluate(&preds, &judgments, a.threshold, a.labels)
        .map_err(|e| CliError::Data(e.to_string()))?;
    report.runtime_seconds = started.elapsed().as_secs_f64();

    if report.r2_undefined {
        eprintln!("warning: truth means are constant; R2 reported as 0");
    }
    let json = serde_json::to_string_pretty(&report).map_err(data("report"))?;
    println!("{json}");
    if let Some(out) = &a.out {
        fs::write(out, format!("{json}\n")).map_err(data(out.display()))?;
    }
    Ok(report)
}
