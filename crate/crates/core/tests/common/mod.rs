#![allow(dead_code)]

use rand::Rng;

use clickbait_gru::nn::{DropoutConfig, Model};
use clickbait_gru::text::{EmbeddingTable, TokenSequence, PAD};
use clickbait_gru::train::Example;
use clickbait_gru::Real;

pub const TINY_VOCAB: usize = 10;
pub const TINY_D: usize = 4;
pub const TINY_H: usize = 3;

/// Tokens drawn from the non-pad ids, padded to `max_len`.
pub fn random_seq<R: Rng>(
    rng: &mut R,
    vocab: usize,
    length: usize,
    max_len: usize,
) -> TokenSequence {
    let mut ids: Vec<usize> = (0..length).map(|_| rng.random_range(1..vocab)).collect();
    ids.resize(max_len.max(length), PAD);
    TokenSequence { ids, length }
}

/// A freshly initialized tiny model with non-trivial embeddings and biases.
pub fn tiny_model<T: Real, R: Rng>(rng: &mut R) -> Model<T> {
    let seed = rng.random();
    let mut emb = EmbeddingTable::<T>::zeros(TINY_VOCAB, TINY_D);
    for id in 1..TINY_VOCAB {
        for v in emb.matrix.row_mut(id) {
            *v = T::from_f64_lossy(rng.random_range(-1.0..1.0));
        }
    }
    let mut m = Model::new(emb, TINY_H, DropoutConfig::NONE, seed).unwrap();
    for p in [&mut m.fwd, &mut m.bwd] {
        for b in [&mut p.b_r, &mut p.b_z, &mut p.b_h] {
            for v in b.iter_mut() {
                *v = T::from_f64_lossy(rng.random_range(-0.5..0.5));
            }
        }
    }
    m.head.b = T::from_f64_lossy(rng.random_range(-0.5..0.5));
    m
}

pub fn tiny_batch<R: Rng>(rng: &mut R, max_batch: usize, max_seq: usize) -> Vec<Example> {
    let n = rng.random_range(1..=max_batch);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max_seq);
            Example {
                seq: random_seq(rng, TINY_VOCAB, len, max_seq),
                target: rng.random_range(0.0..1.0),
            }
        })
        .collect()
}

/// Marker task: the presence of token 2 fixes the target at 0.9, otherwise 0.1.
pub fn marker_examples<R: Rng>(
    rng: &mut R,
    n: usize,
    vocab: usize,
    max_len: usize,
) -> Vec<Example> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..=max_len);
            let mut ids: Vec<usize> = (0..len).map(|_| rng.random_range(3..vocab)).collect();
            let positive = rng.random_bool(0.5);
            if positive {
                let at = rng.random_range(0..len);
                ids[at] = 2;
            }
            ids.resize(max_len, PAD);
            Example {
                seq: TokenSequence { ids, length: len },
                target: if positive { 0.9 } else { 0.1 },
            }
        })
        .collect()
}

pub fn example(seq: TokenSequence, target: f64) -> Example {
    Example { seq, target }
}
