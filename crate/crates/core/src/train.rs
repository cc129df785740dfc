//! Loss, backpropagation through time, RMSprop and the mini-batch training loop.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LabeledDataset, TextField};
use crate::nn::{
    forward, gru_step_backward, predict, DenseSigmoid, DropoutConfig, DropoutMasks, ForwardCache,
    GruParams, Model, NnError, GRU_ARRAY_NAMES,
};
use crate::rng::{self, Stream};
use crate::tensor::{Matrix, Real};
use crate::text::{encode, tokenize, EmbeddingTable, TokenSequence, Vocabulary};

/// Elementwise gradient bound applied after batch accumulation.
pub const DEFAULT_CLIP: f64 = 5.0;

/// Finite-difference step for gradient checking.
pub const FD_STEP: f64 = 1e-5;

/// Examples per rayon work unit; fixed so the reduction order never depends on thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("{0} dataset is empty")]
    EmptyDataset(&'static str),
    #[error("predictions and targets differ in length ({preds} vs {targets})")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("got {masks} dropout mask sets for a batch of {batch}")]
    MaskCount { masks: usize, batch: usize },
    #[error("non-finite loss; first offending parameter: {parameter}")]
    NonFinite { parameter: String },
    #[error(
        "validation MSE is not finite after epoch {epoch}; first offending parameter: {parameter}"
    )]
    ValidationNonFinite { epoch: usize, parameter: String },
    #[error(transparent)]
    Model(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub dropout_embed: f64,
    pub dropout_gru_in: f64,
    pub dropout_gru_out: f64,
    pub d: usize,
    pub h: usize,
    pub max_len: usize,
    pub seed: u64,
    pub text_field: TextField,
    pub min_count: usize,
    /// Elementwise gradient clip; `None` disables clipping.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
            epochs: 20,
            dropout_embed: 0.2,
            dropout_gru_in: 0.2,
            dropout_gru_out: 0.5,
            d: 100,
            h: 128,
            max_len: 32,
            seed: 0,
            text_field: TextField::PostText,
            min_count: 1,
            clip: Some(DEFAULT_CLIP),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_owned()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad("epsilon must be nonnegative");
        }
        if self.d == 0 || self.h == 0 || self.max_len == 0 {
            return bad("d, h and max_len must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        if matches!(self.clip, Some(c) if c.is_nan() || c <= 0.0) {
            return bad("clip must be positive");
        }
        self.dropout().validate()?;
        Ok(())
    }

    pub fn dropout(&self) -> DropoutConfig {
        DropoutConfig {
            embed: self.dropout_embed,
            gru_in: self.dropout_gru_in,
            gru_out: self.dropout_gru_out,
        }
    }
}

/// One encoded post and its regression target (the judgment mean).
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub seq: TokenSequence,
    pub target: f64,
}

/// Tokenizes and encodes every record of a dataset.
pub fn examples_from(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    field: TextField,
    max_len: usize,
) -> Vec<Example> {
    ds.records
        .iter()
        .map(|r| Example {
            seq: encode(&tokenize(&r.post.text(field)), vocab, max_len),
            target: r.judgment.mean,
        })
        .collect()
}

/// Sum of terms in ascending order, so the result does not depend on input order.
fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Mean squared error.
pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64, TrainError> {
    if preds.len() != targets.len() {
        return Err(TrainError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let terms = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .collect();
    Ok(order_free_sum(terms) / preds.len() as f64)
}

/// Gradients for every learnable array. Embedding gradients are kept only for touched rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet<T: Real> {
    pub embedding: BTreeMap<usize, Vec<T>>,
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
    pub head: DenseSigmoid<T>,
}

impl<T: Real> GradientSet<T> {
    pub fn zeros_like(m: &Model<T>) -> Self {
        Self {
            embedding: BTreeMap::new(),
            fwd: GruParams::zeros(m.fwd.hidden(), m.fwd.input()),
            bwd: GruParams::zeros(m.bwd.hidden(), m.bwd.input()),
            head: DenseSigmoid::zeros(m.head.w.len()),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (id, row) in &other.embedding {
            match self.embedding.get_mut(id) {
                Some(acc) => acc.iter_mut().zip(row).for_each(|(a, b)| *a += *b),
                None => {
                    self.embedding.insert(*id, row.clone());
                }
            }
        }
        self.fwd.add_assign(&other.fwd);
        self.bwd.add_assign(&other.bwd);
        self.head
            .w
            .iter_mut()
            .zip(&other.head.w)
            .for_each(|(a, b)| *a += *b);
        self.head.b += other.head.b;
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        let emb = self.embedding.values_mut().flat_map(|r| r.iter_mut());
        let fwd = self.fwd.arrays_mut().into_iter().flat_map(|a| a.iter_mut());
        let bwd = self.bwd.arrays_mut().into_iter().flat_map(|a| a.iter_mut());
        emb.chain(fwd)
            .chain(bwd)
            .chain(self.head.w.iter_mut())
            .chain(std::iter::once(&mut self.head.b))
    }

    pub fn clip(&mut self, limit: T) {
        for v in self.values_mut() {
            *v = v.max(-limit).min(limit);
        }
    }

    pub fn is_finite(&mut self) -> bool {
        self.values_mut().all(|v| v.is_finite())
    }

    /// Arrays in [`Model::named_arrays`] order, embedding densified.
    pub fn named_dense(&self, vocab_size: usize, d: usize) -> Vec<(String, Vec<T>)> {
        let mut emb = vec![T::zero(); vocab_size * d];
        for (id, row) in &self.embedding {
            emb[id * d..(id + 1) * d].copy_from_slice(row);
        }
        let mut out = vec![("embedding".to_owned(), emb)];
        for (prefix, p) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            for (name, a) in GRU_ARRAY_NAMES.iter().zip(p.arrays()) {
                out.push((format!("{prefix}.{name}"), a.to_vec()));
            }
        }
        out.push(("head.w".into(), self.head.w.clone()));
        out.push(("head.b".into(), vec![self.head.b]));
        out
    }
}

/// Reverse pass for one example; `dpred` is dLoss/dprediction.
fn example_gradient<T: Real>(
    m: &Model<T>,
    cache: &ForwardCache<T>,
    masks: &DropoutMasks<T>,
    dpred: T,
) -> GradientSet<T> {
    let mut g = GradientSet::zeros_like(m);
    let p = cache.prediction;
    let da = dpred * p * (T::one() - p);
    for (gw, f) in g.head.w.iter_mut().zip(&cache.features) {
        *gw = da * *f;
    }
    g.head.b = da;

    let n = cache.ids.len();
    if n == 0 {
        return g;
    }
    let hf = m.fwd.hidden();
    let mut dsummary: Vec<T> = m.head.w.iter().map(|w| da * *w).collect();
    if let Some(mask) = &masks.gru_out {
        dsummary.iter_mut().zip(mask).for_each(|(v, k)| *v *= *k);
    }
    let d = m.dim();
    let mut dx = vec![vec![T::zero(); d]; n];

    let mut dh = dsummary[..hf].to_vec();
    for t in (0..n).rev() {
        let mut dh_prev = vec![T::zero(); hf];
        gru_step_backward(
            &m.fwd,
            &cache.inputs[t],
            &cache.fwd_steps[t],
            &dh,
            &mut g.fwd,
            &mut dx[t],
            &mut dh_prev,
        );
        dh = dh_prev;
    }

    let hb = m.bwd.hidden();
    let mut dh = dsummary[hf..].to_vec();
    for k in (0..n).rev() {
        let pos = n - 1 - k;
        let mut dh_prev = vec![T::zero(); hb];
        gru_step_backward(
            &m.bwd,
            &cache.inputs[pos],
            &cache.bwd_steps[k],
            &dh,
            &mut g.bwd,
            &mut dx[pos],
            &mut dh_prev,
        );
        dh = dh_prev;
    }

    if m.embedding.trainable {
        for (t, (&id, dxt)) in cache.ids.iter().zip(&dx).enumerate() {
            let row = g.embedding.entry(id).or_insert_with(|| vec![T::zero(); d]);
            for j in 0..d {
                let e = masks.embed.as_ref().map_or(T::one(), |mk| mk[t * d + j]);
                let i = masks.gru_in.as_ref().map_or(T::one(), |mk| mk[j]);
                row[j] += dxt[j] * e * i;
            }
        }
    }
    g
}

/// Batch MSE and its exact gradient with respect to every parameter.
///
/// `masks` is either `None` (no dropout) or one mask set per example. When `clip`
/// is set, gradient elements are clamped after the whole batch is accumulated.
pub fn backprop<T: Real>(
    m: &Model<T>,
    batch: &[Example],
    masks: Option<&[DropoutMasks<T>]>,
    clip: Option<T>,
) -> Result<(f64, GradientSet<T>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if let Some(ms) = masks {
        if ms.len() != batch.len() {
            return Err(TrainError::MaskCount {
                masks: ms.len(),
                batch: batch.len(),
            });
        }
    }
    for ex in batch {
        m.validate_sequence(&ex.seq)?;
    }
    let scale = T::from_f64_lossy(2.0 / batch.len() as f64);
    let none = DropoutMasks::none();
    let idx: Vec<usize> = (0..batch.len()).collect();
    let partials: Vec<(Vec<f64>, GradientSet<T>)> = idx
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = GradientSet::zeros_like(m);
            let mut terms = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let mk = masks.map_or(&none, |ms| &ms[i]);
                let cache = forward(m, &batch[i].seq, mk);
                let p = cache.prediction;
                let err = p.to_f64().unwrap_or(f64::NAN) - batch[i].target;
                terms.push(err * err);
                let dpred = scale * (p - T::from_f64_lossy(batch[i].target));
                acc.add_assign(&example_gradient(m, &cache, mk, dpred));
            }
            (terms, acc)
        })
        .collect();

    let mut terms = Vec::with_capacity(batch.len());
    let mut grads = GradientSet::zeros_like(m);
    for (t, g) in partials {
        terms.extend(t);
        grads.add_assign(&g);
    }
    let loss = order_free_sum(terms) / batch.len() as f64;
    if !loss.is_finite() || !grads.is_finite() {
        return Err(TrainError::NonFinite {
            parameter: m
                .first_non_finite()
                .unwrap_or_else(|| "prediction".to_owned()),
        });
    }
    if let Some(limit) = clip {
        grads.clip(limit);
    }
    Ok((loss, grads))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl From<&TrainConfig> for RmsPropConfig {
    fn from(c: &TrainConfig) -> Self {
        Self {
            learning_rate: c.learning_rate,
            rho: c.rho,
            epsilon: c.epsilon,
        }
    }
}

/// Running averages of squared gradients, shaped like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState<T: Real> {
    pub embedding: Matrix<T>,
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
    pub head: DenseSigmoid<T>,
}

impl<T: Real> RmsPropState<T> {
    pub fn new(m: &Model<T>) -> Self {
        let (rows, cols) = m.embedding.matrix.shape();
        Self {
            embedding: Matrix::zeros(rows, cols),
            fwd: GruParams::zeros(m.fwd.hidden(), m.fwd.input()),
            bwd: GruParams::zeros(m.bwd.hidden(), m.bwd.input()),
            head: DenseSigmoid::zeros(m.head.w.len()),
        }
    }
}

/// `acc = rho*acc + (1-rho)*g^2; param -= lr*g / (sqrt(acc) + eps)`, elementwise.
pub fn rmsprop_step<T: Real>(params: &mut [T], grads: &[T], acc: &mut [T], cfg: &RmsPropConfig) {
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let rho = T::from_f64_lossy(cfg.rho);
    let one_minus = T::one() - rho;
    let eps = T::from_f64_lossy(cfg.epsilon);
    for ((p, g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        *a = rho * *a + one_minus * *g * *g;
        *p -= lr * *g / (a.sqrt() + eps);
    }
}

fn decay<T: Real>(acc: &mut [T], rho: T) {
    acc.iter_mut().for_each(|a| *a *= rho);
}

pub fn rmsprop_update<T: Real>(
    m: &mut Model<T>,
    grads: &GradientSet<T>,
    state: &mut RmsPropState<T>,
    cfg: &RmsPropConfig,
) {
    if m.embedding.trainable {
        let rho = T::from_f64_lossy(cfg.rho);
        let mut touched = grads.embedding.iter().peekable();
        for row in 0..m.embedding.vocab_size() {
            match touched.peek() {
                Some((&id, g)) if id == row => {
                    rmsprop_step(
                        m.embedding.matrix.row_mut(row),
                        g,
                        state.embedding.row_mut(row),
                        cfg,
                    );
                    touched.next();
                }
                _ => decay(state.embedding.row_mut(row), rho),
            }
        }
    }
    for (p, g, a) in [
        (&mut m.fwd, &grads.fwd, &mut state.fwd),
        (&mut m.bwd, &grads.bwd, &mut state.bwd),
    ] {
        for ((pa, ga), aa) in p
            .arrays_mut()
            .into_iter()
            .zip(g.arrays())
            .zip(a.arrays_mut())
        {
            rmsprop_step(pa, ga, aa, cfg);
        }
    }
    rmsprop_step(&mut m.head.w, &grads.head.w, &mut state.head.w, cfg);
    rmsprop_step(
        std::slice::from_mut(&mut m.head.b),
        std::slice::from_ref(&grads.head.b),
        std::slice::from_mut(&mut state.head.b),
        cfg,
    );
}

/// Inference-mode predictions, in input order.
pub fn predict_all<T: Real>(m: &Model<T>, seqs: &[TokenSequence]) -> Vec<f64> {
    seqs.par_iter()
        .map(|s| predict(m, s).to_f64().unwrap_or(f64::NAN))
        .collect()
}

pub fn evaluate_mse<T: Real>(m: &Model<T>, examples: &[Example]) -> Result<f64, TrainError> {
    let seqs: Vec<TokenSequence> = examples.iter().map(|e| e.seq.clone()).collect();
    let targets: Vec<f64> = examples.iter().map(|e| e.target).collect();
    mse_loss(&predict_all(m, &seqs), &targets)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub valid_mse: f64,
}

#[derive(Clone, Debug)]
pub struct FitOutcome<T: Real> {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: Model<T>,
    /// One row per epoch, starting with epoch 0 (the untrained model).
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl<T: Real> FitOutcome<T> {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch]
    }
}

/// Mini-batch RMSprop over pre-encoded examples, keeping the best-validation checkpoint.
pub fn fit_examples<T: Real>(
    mut model: Model<T>,
    train: &[Example],
    valid: &[Example],
    cfg: &TrainConfig,
) -> Result<FitOutcome<T>, TrainError> {
    cfg.validate()?;
    model.dropout = cfg.dropout();
    model.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if valid.is_empty() {
        return Err(TrainError::EmptyDataset("validation"));
    }
    let opt = RmsPropConfig::from(cfg);
    let clip = cfg.clip.map(T::from_f64_lossy);
    let mut state = RmsPropState::new(&model);
    let mut shuffle_rng = rng::stream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = rng::stream(cfg.seed, Stream::Dropout);

    let record = |epoch: usize, m: &Model<T>| -> Result<EpochRecord, TrainError> {
        let valid_mse = evaluate_mse(m, valid)?;
        if !valid_mse.is_finite() {
            return Err(TrainError::ValidationNonFinite {
                epoch,
                parameter: m.first_non_finite().unwrap_or_else(|| "prediction".into()),
            });
        }
        Ok(EpochRecord {
            epoch,
            train_mse: evaluate_mse(m, train)?,
            valid_mse,
        })
    };

    let mut history = vec![record(0, &model)?];
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train[i].clone()).collect();
            let masks: Vec<DropoutMasks<T>> = batch
                .iter()
                .map(|ex| {
                    DropoutMasks::sample(
                        &model.dropout,
                        ex.seq.length,
                        model.dim(),
                        model.summary_len(),
                        &mut dropout_rng,
                    )
                })
                .collect();
            let (_, grads) = backprop(&model, &batch, Some(&masks), clip)?;
            rmsprop_update(&mut model, &grads, &mut state, &opt);
        }
        let rec = record(epoch, &model)?;
        if rec.valid_mse < history[best_epoch].valid_mse {
            best = model.clone();
            best_epoch = epoch;
        }
        history.push(rec);
    }
    Ok(FitOutcome {
        model: best,
        history,
        best_epoch,
    })
}

/// Trains on labeled datasets, using the judgment mean as target.
pub fn fit<T: Real>(
    train: &LabeledDataset,
    valid: &LabeledDataset,
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    embeddings: EmbeddingTable<T>,
) -> Result<FitOutcome<T>, TrainError> {
    cfg.validate()?;
    if embeddings.vocab_size() != vocab.len() {
        return Err(TrainError::Config(format!(
            "embedding table has {} rows for a vocabulary of {}",
            embeddings.vocab_size(),
            vocab.len()
        )));
    }
    if embeddings.dim() != cfg.d {
        return Err(TrainError::Config(format!(
            "embedding dimension {} does not match d = {}",
            embeddings.dim(),
            cfg.d
        )));
    }
    let train_ex = examples_from(train, vocab, cfg.text_field, cfg.max_len);
    let valid_ex = examples_from(valid, vocab, cfg.text_field, cfg.max_len);
    let model = Model::new(embeddings, cfg.h, cfg.dropout(), cfg.seed)?;
    fit_examples(model, &train_ex, &valid_ex, cfg)
}

pub fn write_history<W: Write>(w: W, history: &[EpochRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for rec in history {
        out.serialize(rec)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Maximum relative error per parameter array, in model order.
    pub per_array: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares analytic gradients against central differences on every parameter element.
///
/// Dropout and clipping are off. Relative error is `|a-n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check(
    m: &Model<f64>,
    batch: &[Example],
    tolerance: f64,
) -> Result<GradCheckReport, TrainError> {
    let (_, grads) = backprop(m, batch, None, None)?;
    let analytic = grads.named_dense(m.embedding.vocab_size(), m.dim());
    let targets: Vec<f64> = batch.iter().map(|e| e.target).collect();
    let loss = |mm: &Model<f64>| -> f64 {
        let preds: Vec<f64> = batch.iter().map(|e| predict(mm, &e.seq)).collect();
        mse_loss(&preds, &targets).unwrap_or(f64::NAN)
    };
    let mut probe = m.clone();
    let mut per_array = Vec::with_capacity(analytic.len());
    for (k, (name, a)) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for (i, &ai) in a.iter().enumerate() {
            let orig = probe.named_arrays()[k].1[i];
            probe.named_arrays_mut()[k].1[i] = orig + FD_STEP;
            let plus = loss(&probe);
            probe.named_arrays_mut()[k].1[i] = orig - FD_STEP;
            let minus = loss(&probe);
            probe.named_arrays_mut()[k].1[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let denom = ai.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((ai - numeric).abs() / denom);
        }
        per_array.push((name.clone(), worst));
    }
    let max_rel_error = per_array.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_array,
        max_rel_error,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}
