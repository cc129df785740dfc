//! Tokenization, vocabulary construction and GloVe-initialized embeddings.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::tensor::{Matrix, Real};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Half-width of the uniform range used for tokens without a pretrained vector.
pub const OOV_INIT_SCALE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("min_count must be at least 1")]
    MinCount,
    #[error("GloVe vectors have dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("GloVe line {line}: expected {expected} values, found {found}")]
    VectorLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("GloVe line {line}: invalid number \"{value}\"")]
    BadNumber { line: usize, value: String },
    #[error("GloVe line {line}: non-finite value")]
    NonFinite { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercases, splits on whitespace and peels leading and trailing ASCII
/// punctuation off each word as single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for word in lower.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let start = chars
            .iter()
            .position(|c| !c.is_ascii_punctuation())
            .unwrap_or(chars.len());
        let end = chars
            .iter()
            .rposition(|c| !c.is_ascii_punctuation())
            .map_or(start, |p| p + 1);
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary ordered by descending frequency, ties lexicographic.
    pub fn build(corpus: &[Vec<String>], min_count: usize) -> Result<Self, TextError> {
        if min_count == 0 {
            return Err(TextError::MinCount);
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for tok in corpus.iter().flatten() {
            *freq.entry(tok.as_str()).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> =
            freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_tokens(
            kept.into_iter().map(|(t, _)| t.to_owned()),
        ))
    }

    /// Vocabulary from an ordered token list; ids start at 2.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut id_to_token = vec![PAD_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        let mut token_to_id = HashMap::new();
        for t in tokens {
            if token_to_id.contains_key(&t) {
                continue;
            }
            token_to_id.insert(t.clone(), id_to_token.len());
            id_to_token.push(t);
        }
        Self {
            token_to_id,
            id_to_token,
        }
    }

    /// Reconstructs a vocabulary from its full id-ordered token list (specials included).
    pub fn from_id_list(id_to_token: Vec<String>) -> Option<Self> {
        if id_to_token.len() < 2 {
            return None;
        }
        let corpus = id_to_token[2..].to_vec();
        let v = Self::from_tokens(corpus);
        (v.len() == id_to_token.len()).then_some(v)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 2
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Tokens in id order, including PAD and UNK.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Alias kept for call sites that read better as a free function.
pub fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> Result<Vocabulary, TextError> {
    Vocabulary::build(corpus, min_count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingTable<T: Real> {
    pub matrix: Matrix<T>,
    pub trainable: bool,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn zeros(vocab_size: usize, d: usize) -> Self {
        Self {
            matrix: Matrix::zeros(vocab_size, d),
            trainable: true,
        }
    }

    /// Every row except PAD drawn from U(-0.05, 0.05).
    pub fn random(vocab_size: usize, d: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Stream::Embedding);
        let mut matrix = Matrix::zeros(vocab_size, d);
        for i in 0..vocab_size {
            for v in matrix.row_mut(i) {
                let u: f64 = rng.random_range(-OOV_INIT_SCALE..=OOV_INIT_SCALE);
                *v = T::from_f64_lossy(u);
            }
        }
        if vocab_size > PAD {
            matrix.row_mut(PAD).fill(T::zero());
        }
        Self {
            matrix,
            trainable: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, id: usize) -> &[T] {
        self.matrix.row(id)
    }
}

/// Embedding table built from a GloVe stream, and how many vocabulary tokens it covered.
#[derive(Clone, Debug)]
pub struct GloveLoad<T: Real> {
    pub table: EmbeddingTable<T>,
    pub matched: usize,
}

/// Reads GloVe text vectors for the tokens of `vocab`.
///
/// Rows of tokens missing from the file (and UNK) keep their seeded uniform
/// initialization; PAD stays zero.
pub fn load_glove<T: Real, R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    d: usize,
    seed: u64,
) -> Result<GloveLoad<T>, TextError> {
    let mut table = EmbeddingTable::<T>::random(vocab.len(), d, seed);
    let mut filled: HashSet<usize> = HashSet::new();
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != d {
            if first {
                return Err(TextError::DimensionMismatch {
                    expected: d,
                    found: values.len(),
                });
            }
            return Err(TextError::VectorLength {
                line: line_no,
                expected: d,
                found: values.len(),
            });
        }
        first = false;
        let Some(id) = vocab.id(token) else { continue };
        if !filled.insert(id) {
            continue;
        }
        let row = table.matrix.row_mut(id);
        for (slot, raw) in row.iter_mut().zip(&values) {
            let v: f64 = raw.parse().map_err(|_| TextError::BadNumber {
                line: line_no,
                value: (*raw).to_owned(),
            })?;
            if !v.is_finite() {
                return Err(TextError::NonFinite { line: line_no });
            }
            *slot = T::from_f64_lossy(v);
        }
    }
    Ok(GloveLoad {
        table,
        matched: filled.len(),
    })
}

/// Token ids padded or truncated to a fixed width.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    /// Number of real tokens before padding.
    pub length: usize,
}

impl TokenSequence {
    /// The unpadded prefix.
    pub fn tokens(&self) -> &[usize] {
        &self.ids[..self.length]
    }
}

/// Maps tokens to ids, truncating past `max_len` and padding with PAD.
pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    let max_len = max_len.max(1);
    let mut ids: Vec<usize> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.id(t).unwrap_or(UNK))
        .collect();
    let length = ids.len();
    ids.resize(max_len, PAD);
    TokenSequence { ids, length }
}
