//! Training on generated posts, then saving and reloading the checkpoint.

use clickbait_gru::checkpoint::Checkpoint;
use clickbait_gru::ingest::stratified_split;
use clickbait_gru::nn::predict;
use clickbait_gru::synthetic::toy_dataset;
use clickbait_gru::text::{encode, tokenize, EmbeddingTable, Vocabulary};
use clickbait_gru::train::{fit, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = toy_dataset(600, 1);
    let (train, valid) = stratified_split(&ds, 0.2, 0)?;

    let cfg = TrainConfig {
        d: 16,
        h: 16,
        batch_size: 32,
        learning_rate: 5e-3,
        epochs: 8,
        max_len: 16,
        ..TrainConfig::default()
    };
    let corpus: Vec<Vec<String>> = train
        .records
        .iter()
        .map(|r| tokenize(&r.post.text(cfg.text_field)))
        .collect();
    let vocab = Vocabulary::build(&corpus, cfg.min_count)?;
    let emb = EmbeddingTable::<f32>::random(vocab.len(), cfg.d, cfg.seed);

    let out = fit(&train, &valid, &cfg, &vocab, emb)?;
    println!("epoch  train_mse  valid_mse");
    for r in &out.history {
        println!("{:>5}  {:.5}    {:.5}", r.epoch, r.train_mse, r.valid_mse);
    }
    println!("kept epoch {}", out.best_epoch);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    let ck = Checkpoint {
        text_field: cfg.text_field,
        max_len: cfg.max_len,
        vocab,
        model: out.model,
    };
    ck.save(&path)?;
    let back = Checkpoint::<f32>::load(&path)?;
    for post in [
        "You won't believe the new budget",
        "Court rules on the new budget",
    ] {
        let seq = encode(&tokenize(post), &back.vocab, back.max_len);
        println!("{post:?}: {:.3}", predict(&back.model, &seq));
    }
    Ok(())
}
