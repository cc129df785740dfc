//! One GRU step, a bidirectional pass and the sigmoid score.

use clickbait_gru::nn::{
    encode_post, gru_step, predict, run_direction, DropoutConfig, Mode, Model,
};
use clickbait_gru::text::{encode, tokenize, EmbeddingTable, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = Vocabulary::from_tokens(
        ["this", "is", "why", "you", "should", "never", "click"].map(String::from),
    );
    let emb = EmbeddingTable::<f64>::random(vocab.len(), 6, 1);
    let model = Model::new(emb, 4, DropoutConfig::default(), 1)?;

    let seq = encode(&tokenize("This is why you should never click"), &vocab, 10);
    let xs: Vec<Vec<f64>> = seq
        .tokens()
        .iter()
        .map(|&id| model.embedding.row(id).to_vec())
        .collect();

    let (h1, cache) = gru_step(&model.fwd, &xs[0], &[0.0; 4])?;
    println!(
        "first step: r {:.3?}\n            z {:.3?}\n            h {:.3?}",
        cache.r, cache.z, h1
    );

    let fwd = run_direction(&model.fwd, &xs, false)?;
    let bwd = run_direction(&model.bwd, &xs, true)?;
    println!(
        "forward summary (last position):  {:.3?}",
        fwd.last().unwrap()
    );
    println!("backward summary (first position): {:.3?}", bwd[0]);

    let features = encode_post(&model, &seq, Mode::Infer);
    println!("post representation: {} values", features.len());
    println!("clickbait score: {:.4}", predict(&model, &seq));
    Ok(())
}
