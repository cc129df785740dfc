//! Clickbait scoring with a bidirectional GRU.
//!
//! The crate covers the whole pipeline for the Clickbait Challenge data:
//!
//! - [`ingest`]: instance/truth JSONL parsing, label derivation, stratified splits, duplicate detection
//! - [`text`]: tokenizer, vocabulary, GloVe loading, fixed-width encoding
//! - [`nn`]: GRU cell, bidirectional encoder, sigmoid head, dropout
//! - [`train`]: MSE, backpropagation through time, RMSprop, training loop, gradient checking
//! - [`metrics`]: MSE, median absolute error, precision/recall/F1, accuracy, R²
//! - [`analytics`]: dataset statistics behind the exploratory plots
//! - [`cli`]: the `clickbait` command-line tool
//!
//! ```
//! use clickbait_gru::nn::{predict, DropoutConfig, Model};
//! use clickbait_gru::text::{encode, tokenize, EmbeddingTable, Vocabulary};
//!
//! let vocab = Vocabulary::from_tokens(["you", "won't", "believe"].map(String::from));
//! let emb = EmbeddingTable::<f32>::random(vocab.len(), 8, 1);
//! let model = Model::new(emb, 4, DropoutConfig::default(), 1).unwrap();
//! let seq = encode(&tokenize("You won't believe this"), &vocab, 16);
//! let score = predict(&model, &seq);
//! assert!(score > 0.0 && score < 1.0);
//! ```

pub mod analytics;
pub mod checkpoint;
pub mod cli;
pub mod ingest;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod train;

pub use checkpoint::Checkpoint;
pub use ingest::{ClassLabel, Judgment, LabeledDataset, PostRecord, TextField};
pub use metrics::EvalReport;
pub use nn::{DropoutConfig, GruParams, Model};
pub use tensor::{Matrix, Real};
pub use text::{EmbeddingTable, TokenSequence, Vocabulary};
pub use train::{Example, TrainConfig};
