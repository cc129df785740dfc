//! Bidirectional GRU regressor: GRU cell, direction runner, sigmoid head and dropout.
//!
//! One GRU step computes
//!
//! ```text
//! r  = σ(W_r x + U_r h_prev + b_r)
//! z  = σ(W_z x + U_z h_prev + b_z)
//! h~ = tanh(W_h x + r ⊙ (U_h h_prev) + b_h)
//! h  = (1 - z) ⊙ h_prev + z ⊙ h~
//! ```
//!
//! A post is encoded as `[h_fwd(N), h_bwd(1)]`: the final state of the
//! left-to-right pass and the final state of the right-to-left pass, which
//! sits at the first token. The head maps that `2h` vector through a single
//! sigmoid unit.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::tensor::{dot, sigmoid, Matrix, Real};
use crate::text::{EmbeddingTable, TokenSequence};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{what}: expected length {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("sequence length {length} exceeds {ids} ids")]
    SequenceLength { length: usize, ids: usize },
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), NnError> {
    if expected == found {
        Ok(())
    } else {
        Err(NnError::Shape {
            what,
            expected,
            found,
        })
    }
}

/// Learnable arrays of one GRU direction. Also used as its own gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GruParams<T: Real> {
    pub w_r: Matrix<T>,
    pub w_z: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_z: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_r: Vec<T>,
    pub b_z: Vec<T>,
    pub b_h: Vec<T>,
}

pub const GRU_ARRAY_NAMES: [&str; 9] = [
    "w_r", "w_z", "w_h", "u_r", "u_z", "u_h", "b_r", "b_z", "b_h",
];

impl<T: Real> GruParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w_r: Matrix::zeros(hidden, input),
            w_z: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, input),
            u_r: Matrix::zeros(hidden, hidden),
            u_z: Matrix::zeros(hidden, hidden),
            u_h: Matrix::zeros(hidden, hidden),
            b_r: vec![T::zero(); hidden],
            b_z: vec![T::zero(); hidden],
            b_h: vec![T::zero(); hidden],
        }
    }

    /// Input matrices uniform in ±sqrt(6/(d+h)), recurrent matrices orthogonal, biases zero.
    pub fn init<R: Rng + ?Sized>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + hidden).max(1) as f64).sqrt();
        let uniform = |rng: &mut R| {
            Matrix::from_fn(hidden, input, |_, _| {
                T::from_f64_lossy(rng.random_range(-limit..=limit))
            })
        };
        let w_r = uniform(rng);
        let w_z = uniform(rng);
        let w_h = uniform(rng);
        Self {
            w_r,
            w_z,
            w_h,
            u_r: orthogonal(hidden, rng),
            u_z: orthogonal(hidden, rng),
            u_h: orthogonal(hidden, rng),
            b_r: vec![T::zero(); hidden],
            b_z: vec![T::zero(); hidden],
            b_h: vec![T::zero(); hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_r.len()
    }

    pub fn input(&self) -> usize {
        self.w_r.cols()
    }

    /// The nine arrays in [`GRU_ARRAY_NAMES`] order.
    pub fn arrays(&self) -> [&[T]; 9] {
        [
            self.w_r.as_slice(),
            self.w_z.as_slice(),
            self.w_h.as_slice(),
            self.u_r.as_slice(),
            self.u_z.as_slice(),
            self.u_h.as_slice(),
            &self.b_r,
            &self.b_z,
            &self.b_h,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut [T]; 9] {
        [
            self.w_r.as_mut_slice(),
            self.w_z.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_r,
            &mut self.b_z,
            &mut self.b_h,
        ]
    }

    pub fn check_shapes(&self) -> Result<(), NnError> {
        let (h, d) = (self.hidden(), self.input());
        for (what, m, rows, cols) in [
            ("w_r", &self.w_r, h, d),
            ("w_z", &self.w_z, h, d),
            ("w_h", &self.w_h, h, d),
            ("u_r", &self.u_r, h, h),
            ("u_z", &self.u_z, h, h),
            ("u_h", &self.u_h, h, h),
        ] {
            check_len(what, rows * cols, m.rows() * m.cols())?;
            check_len(what, rows, m.rows())?;
        }
        check_len("b_z", h, self.b_z.len())?;
        check_len("b_h", h, self.b_h.len())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> GruParams<U> {
        let c = |v: T| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN));
        GruParams {
            w_r: self.w_r.map(c),
            w_z: self.w_z.map(c),
            w_h: self.w_h.map(c),
            u_r: self.u_r.map(c),
            u_z: self.u_z.map(c),
            u_h: self.u_h.map(c),
            b_r: self.b_r.iter().map(|v| c(*v)).collect(),
            b_z: self.b_z.iter().map(|v| c(*v)).collect(),
            b_h: self.b_h.iter().map(|v| c(*v)).collect(),
        }
    }
}

/// Q factor of a seeded Gaussian matrix, sign-corrected so the distribution is uniform.
fn orthogonal<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix<T> {
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    Matrix::from_fn(n, n, |i, j| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        T::from_f64_lossy(q[(i, j)] * sign)
    })
}

/// Intermediate values of one GRU step, kept for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCache<T: Real> {
    pub h_prev: Vec<T>,
    pub r: Vec<T>,
    pub z: Vec<T>,
    /// `U_h h_prev`, before gating by `r`.
    pub uh: Vec<T>,
    pub h_tilde: Vec<T>,
    pub h: Vec<T>,
}

pub(crate) fn step<T: Real>(p: &GruParams<T>, x: &[T], h_prev: &[T]) -> StepCache<T> {
    let h = p.hidden();
    let mut a_r = p.b_r.clone();
    p.w_r.matvec_acc(x, &mut a_r);
    p.u_r.matvec_acc(h_prev, &mut a_r);
    let mut a_z = p.b_z.clone();
    p.w_z.matvec_acc(x, &mut a_z);
    p.u_z.matvec_acc(h_prev, &mut a_z);
    let mut uh = vec![T::zero(); h];
    p.u_h.matvec_acc(h_prev, &mut uh);
    let mut a_h = p.b_h.clone();
    p.w_h.matvec_acc(x, &mut a_h);

    let r: Vec<T> = a_r.into_iter().map(sigmoid).collect();
    let z: Vec<T> = a_z.into_iter().map(sigmoid).collect();
    let h_tilde: Vec<T> = (0..h).map(|i| (a_h[i] + r[i] * uh[i]).tanh()).collect();
    let h_new: Vec<T> = (0..h)
        .map(|i| (T::one() - z[i]) * h_prev[i] + z[i] * h_tilde[i])
        .collect();
    StepCache {
        h_prev: h_prev.to_vec(),
        r,
        z,
        uh,
        h_tilde,
        h: h_new,
    }
}

/// Reverse-mode pass through one step.
///
/// `dh` is the loss gradient with respect to the step's output state. Parameter
/// gradients accumulate into `grads`; input and previous-state gradients
/// accumulate into `dx` and `dh_prev`.
pub fn gru_step_backward<T: Real>(
    p: &GruParams<T>,
    x: &[T],
    cache: &StepCache<T>,
    dh: &[T],
    grads: &mut GruParams<T>,
    dx: &mut [T],
    dh_prev: &mut [T],
) {
    let h = p.hidden();
    let one = T::one();
    let mut da_r = vec![T::zero(); h];
    let mut da_z = vec![T::zero(); h];
    let mut da_h = vec![T::zero(); h];
    let mut duh = vec![T::zero(); h];
    for i in 0..h {
        let (r, z, ht, hp) = (cache.r[i], cache.z[i], cache.h_tilde[i], cache.h_prev[i]);
        let dz = dh[i] * (ht - hp);
        let dht = dh[i] * z;
        dh_prev[i] += dh[i] * (one - z);
        da_h[i] = dht * (one - ht * ht);
        let dr = da_h[i] * cache.uh[i];
        duh[i] = da_h[i] * r;
        da_r[i] = dr * r * (one - r);
        da_z[i] = dz * z * (one - z);
    }
    grads.w_r.add_outer(&da_r, x);
    grads.w_z.add_outer(&da_z, x);
    grads.w_h.add_outer(&da_h, x);
    grads.u_r.add_outer(&da_r, &cache.h_prev);
    grads.u_z.add_outer(&da_z, &cache.h_prev);
    grads.u_h.add_outer(&duh, &cache.h_prev);
    for i in 0..h {
        grads.b_r[i] += da_r[i];
        grads.b_z[i] += da_z[i];
        grads.b_h[i] += da_h[i];
    }
    p.u_r.matvec_t_acc(&da_r, dh_prev);
    p.u_z.matvec_t_acc(&da_z, dh_prev);
    p.u_h.matvec_t_acc(&duh, dh_prev);
    p.w_r.matvec_t_acc(&da_r, dx);
    p.w_z.matvec_t_acc(&da_z, dx);
    p.w_h.matvec_t_acc(&da_h, dx);
}

/// One GRU step with shape checking.
pub fn gru_step<T: Real>(
    p: &GruParams<T>,
    x: &[T],
    h_prev: &[T],
) -> Result<(Vec<T>, StepCache<T>), NnError> {
    p.check_shapes()?;
    check_len("x_t", p.input(), x.len())?;
    check_len("h_prev", p.hidden(), h_prev.len())?;
    let cache = step(p, x, h_prev);
    Ok((cache.h.clone(), cache))
}

/// Runs one direction from the zero state over `xs` (already cut to the true length).
///
/// The returned states are aligned to input positions in both modes. A zero-length
/// input yields a single zero state, which then serves as the summary.
pub fn run_direction<T: Real>(
    p: &GruParams<T>,
    xs: &[Vec<T>],
    reversed: bool,
) -> Result<Vec<Vec<T>>, NnError> {
    p.check_shapes()?;
    for x in xs {
        check_len("x_t", p.input(), x.len())?;
    }
    let h = p.hidden();
    if xs.is_empty() {
        return Ok(vec![vec![T::zero(); h]]);
    }
    let n = xs.len();
    let mut states = vec![Vec::new(); n];
    let mut state = vec![T::zero(); h];
    for k in 0..n {
        let pos = if reversed { n - 1 - k } else { k };
        state = step(p, &xs[pos], &state).h;
        states[pos] = state.clone();
    }
    Ok(states)
}

/// Single sigmoid unit over the concatenated summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseSigmoid<T: Real> {
    pub w: Vec<T>,
    pub b: T,
}

impl<T: Real> DenseSigmoid<T> {
    pub fn zeros(input: usize) -> Self {
        Self {
            w: vec![T::zero(); input],
            b: T::zero(),
        }
    }

    pub fn forward(&self, features: &[T]) -> T {
        sigmoid(dot(&self.w, features) + self.b)
    }
}

/// Inverted-dropout rates for the three dropout sites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutConfig {
    /// Applied per element and per timestep to the embedded tokens.
    pub embed: f64,
    /// Applied to the GRU input with one mask shared across timesteps.
    pub gru_in: f64,
    /// Applied to the concatenated `2h` summary.
    pub gru_out: f64,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        Self {
            embed: 0.2,
            gru_in: 0.2,
            gru_out: 0.5,
        }
    }
}

impl DropoutConfig {
    pub const NONE: DropoutConfig = DropoutConfig {
        embed: 0.0,
        gru_in: 0.0,
        gru_out: 0.0,
    };

    pub fn validate(&self) -> Result<(), NnError> {
        for rate in [self.embed, self.gru_in, self.gru_out] {
            if !(0.0..1.0).contains(&rate) {
                return Err(NnError::DropoutRate(rate));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model<T: Real> {
    pub embedding: EmbeddingTable<T>,
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
    pub head: DenseSigmoid<T>,
    pub dropout: DropoutConfig,
}

impl<T: Real> Model<T> {
    /// A freshly initialized model around an existing embedding table.
    pub fn new(
        embedding: EmbeddingTable<T>,
        hidden: usize,
        dropout: DropoutConfig,
        seed: u64,
    ) -> Result<Self, NnError> {
        dropout.validate()?;
        let d = embedding.dim();
        let mut rng = rng::stream(seed, Stream::Init);
        let fwd = GruParams::init(hidden, d, &mut rng);
        let bwd = GruParams::init(hidden, d, &mut rng);
        let limit = (6.0 / (2 * hidden + 1) as f64).sqrt();
        let head = DenseSigmoid {
            w: (0..2 * hidden)
                .map(|_| T::from_f64_lossy(rng.random_range(-limit..=limit)))
                .collect(),
            b: T::zero(),
        };
        Ok(Self {
            embedding,
            fwd,
            bwd,
            head,
            dropout,
        })
    }

    pub fn zeros(vocab_size: usize, d: usize, hidden: usize) -> Self {
        Self {
            embedding: EmbeddingTable::zeros(vocab_size, d),
            fwd: GruParams::zeros(hidden, d),
            bwd: GruParams::zeros(hidden, d),
            head: DenseSigmoid::zeros(2 * hidden),
            dropout: DropoutConfig::NONE,
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim()
    }

    pub fn summary_len(&self) -> usize {
        self.fwd.hidden() + self.bwd.hidden()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.fwd.check_shapes()?;
        self.bwd.check_shapes()?;
        check_len("fwd input", self.dim(), self.fwd.input())?;
        check_len("bwd input", self.dim(), self.bwd.input())?;
        check_len("head", self.summary_len(), self.head.w.len())?;
        self.dropout.validate()
    }

    pub fn validate_sequence(&self, seq: &TokenSequence) -> Result<(), NnError> {
        if seq.length > seq.ids.len() {
            return Err(NnError::SequenceLength {
                length: seq.length,
                ids: seq.ids.len(),
            });
        }
        let vocab = self.embedding.vocab_size();
        match seq.tokens().iter().find(|&&id| id >= vocab) {
            Some(&id) => Err(NnError::TokenOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    /// Every learnable array with a stable name, in a fixed order.
    pub fn named_arrays(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> =
            vec![("embedding".into(), self.embedding.matrix.as_slice())];
        for (prefix, p) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            for (name, a) in GRU_ARRAY_NAMES.iter().zip(p.arrays()) {
                out.push((format!("{prefix}.{name}"), a));
            }
        }
        out.push(("head.w".into(), &self.head.w));
        out.push(("head.b".into(), std::slice::from_ref(&self.head.b)));
        out
    }

    pub fn named_arrays_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> =
            vec![("embedding".into(), self.embedding.matrix.as_mut_slice())];
        for (prefix, p) in [("fwd", &mut self.fwd), ("bwd", &mut self.bwd)] {
            for (name, a) in GRU_ARRAY_NAMES.iter().zip(p.arrays_mut()) {
                out.push((format!("{prefix}.{name}"), a));
            }
        }
        out.push(("head.w".into(), &mut self.head.w));
        out.push(("head.b".into(), std::slice::from_mut(&mut self.head.b)));
        out
    }

    /// Name of the first array holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_arrays()
            .into_iter()
            .find(|(_, a)| a.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        let c = |v: T| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN));
        Model {
            embedding: EmbeddingTable {
                matrix: self.embedding.matrix.map(c),
                trainable: self.embedding.trainable,
            },
            fwd: self.fwd.cast(),
            bwd: self.bwd.cast(),
            head: DenseSigmoid {
                w: self.head.w.iter().map(|v| c(*v)).collect(),
                b: c(self.head.b),
            },
            dropout: self.dropout,
        }
    }
}

/// Multiplicative inverted-dropout masks for one example. `None` means no dropout at that site.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks<T: Real> {
    /// `length * d` values, row per timestep.
    pub embed: Option<Vec<T>>,
    /// `d` values shared by every timestep.
    pub gru_in: Option<Vec<T>>,
    /// `2h` values.
    pub gru_out: Option<Vec<T>>,
}

impl<T: Real> DropoutMasks<T> {
    pub fn none() -> Self {
        Self {
            embed: None,
            gru_in: None,
            gru_out: None,
        }
    }

    /// Fresh masks for a sequence of `length` tokens.
    pub fn sample<R: Rng + ?Sized>(
        cfg: &DropoutConfig,
        length: usize,
        d: usize,
        summary_len: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            embed: bernoulli_mask(cfg.embed, length * d, rng),
            gru_in: bernoulli_mask(cfg.gru_in, d, rng),
            gru_out: bernoulli_mask(cfg.gru_out, summary_len, rng),
        }
    }

    fn input_scale(&self, t: usize, j: usize, d: usize) -> T {
        let e = self.embed.as_ref().map_or(T::one(), |m| m[t * d + j]);
        let i = self.gru_in.as_ref().map_or(T::one(), |m| m[j]);
        e * i
    }
}

fn bernoulli_mask<T: Real, R: Rng + ?Sized>(rate: f64, n: usize, rng: &mut R) -> Option<Vec<T>> {
    if rate <= 0.0 {
        return None;
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    Some(
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect(),
    )
}

pub enum Mode<'a> {
    Infer,
    Train(&'a mut dyn RngCore),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T: Real> {
    /// Unpadded token ids.
    pub ids: Vec<usize>,
    /// GRU inputs after dropout, one per position.
    pub inputs: Vec<Vec<T>>,
    /// Forward-direction steps, position order.
    pub fwd_steps: Vec<StepCache<T>>,
    /// Backward-direction steps in processing order (last position first).
    pub bwd_steps: Vec<StepCache<T>>,
    /// Concatenated summary before output dropout.
    pub summary: Vec<T>,
    /// Summary after output dropout; the head's input.
    pub features: Vec<T>,
    pub prediction: T,
}

/// Full forward pass with explicit dropout masks.
///
/// # Panics
/// If a token id is outside the embedding table or masks have the wrong size.
pub fn forward<T: Real>(
    m: &Model<T>,
    seq: &TokenSequence,
    masks: &DropoutMasks<T>,
) -> ForwardCache<T> {
    let d = m.dim();
    let h = m.hidden();
    let ids = seq.tokens().to_vec();
    let n = ids.len();
    let inputs: Vec<Vec<T>> = ids
        .iter()
        .enumerate()
        .map(|(t, &id)| {
            let row = m.embedding.row(id);
            if masks.embed.is_none() && masks.gru_in.is_none() {
                row.to_vec()
            } else {
                (0..d)
                    .map(|j| row[j] * masks.input_scale(t, j, d))
                    .collect()
            }
        })
        .collect();

    let mut fwd_steps = Vec::with_capacity(n);
    let mut state = vec![T::zero(); h];
    for x in &inputs {
        let c = step(&m.fwd, x, &state);
        state = c.h.clone();
        fwd_steps.push(c);
    }
    let fwd_final = state;

    let hb = m.bwd.hidden();
    let mut bwd_steps = Vec::with_capacity(n);
    let mut state = vec![T::zero(); hb];
    for x in inputs.iter().rev() {
        let c = step(&m.bwd, x, &state);
        state = c.h.clone();
        bwd_steps.push(c);
    }
    let bwd_final = state;

    let mut summary = fwd_final;
    summary.extend_from_slice(&bwd_final);
    let features = match &masks.gru_out {
        Some(mask) => summary.iter().zip(mask).map(|(s, k)| *s * *k).collect(),
        None => summary.clone(),
    };
    let prediction = m.head.forward(&features);
    ForwardCache {
        ids,
        inputs,
        fwd_steps,
        bwd_steps,
        summary,
        features,
        prediction,
    }
}

/// The `2h` representation of a post; dropout only in train mode.
pub fn encode_post<T: Real>(m: &Model<T>, seq: &TokenSequence, mode: Mode<'_>) -> Vec<T> {
    let masks = match mode {
        Mode::Infer => DropoutMasks::none(),
        Mode::Train(rng) => {
            DropoutMasks::sample(&m.dropout, seq.length, m.dim(), m.summary_len(), rng)
        }
    };
    forward(m, seq, &masks).features
}

/// Clickbait score in (0, 1), inference mode.
pub fn predict<T: Real>(m: &Model<T>, seq: &TokenSequence) -> T {
    forward(m, seq, &DropoutMasks::none()).prediction
}
