//! Self-describing JSON checkpoint: vocabulary, model arrays, dropout and text settings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TextField;
use crate::nn::{Model, NnError};
use crate::tensor::Real;
use crate::text::Vocabulary;

pub const FORMAT_TAG: &str = "clickbait-gru-checkpoint/v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format \"{0}\"")]
    Format(String),
    #[error("checkpoint holds {found} parameters, expected {expected}")]
    Precision {
        expected: &'static str,
        found: String,
    },
    #[error("vocabulary of {vocab} tokens does not match embedding table of {rows} rows")]
    VocabSize { vocab: usize, rows: usize },
    #[error("checkpoint vocabulary is malformed")]
    Vocabulary,
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
struct Container<T: Real> {
    format: String,
    precision: String,
    text_field: TextField,
    max_len: usize,
    vocabulary: Vec<String>,
    model: Model<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T: Real> {
    pub text_field: TextField,
    pub max_len: usize,
    pub vocab: Vocabulary,
    pub model: Model<T>,
}

impl<T: Real> Checkpoint<T> {
    pub fn to_writer<W: Write>(&self, w: W) -> Result<(), CheckpointError> {
        let c = Container {
            format: FORMAT_TAG.to_owned(),
            precision: T::NAME.to_owned(),
            text_field: self.text_field,
            max_len: self.max_len,
            vocabulary: self.vocab.tokens().to_vec(),
            model: self.model.clone(),
        };
        serde_json::to_writer(w, &c)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_reader(r)?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        if format != FORMAT_TAG {
            return Err(CheckpointError::Format(format.to_owned()));
        }
        let precision = value
            .get("precision")
            .and_then(|v| v.as_str())
            .unwrap_or("");
        if precision != T::NAME {
            return Err(CheckpointError::Precision {
                expected: T::NAME,
                found: precision.to_owned(),
            });
        }
        let c: Container<T> = serde_json::from_value(value)?;
        let vocab = Vocabulary::from_id_list(c.vocabulary).ok_or(CheckpointError::Vocabulary)?;
        if vocab.len() != c.model.embedding.vocab_size() {
            return Err(CheckpointError::VocabSize {
                vocab: vocab.len(),
                rows: c.model.embedding.vocab_size(),
            });
        }
        c.model.validate()?;
        Ok(Self {
            text_field: c.text_field,
            max_len: c.max_len,
            vocab,
            model: c.model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }
}
