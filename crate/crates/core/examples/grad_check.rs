//! Analytic gradients against central finite differences on a tiny model.

use clickbait_gru::nn::{DropoutConfig, Model};
use clickbait_gru::text::{EmbeddingTable, TokenSequence};
use clickbait_gru::train::{grad_check, Example};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut emb = EmbeddingTable::<f64>::random(10, 4, 3);
    for id in 1..10 {
        for v in emb.matrix.row_mut(id) {
            *v *= 10.0;
        }
    }
    let model = Model::new(emb, 3, DropoutConfig::NONE, 3)?;
    let batch = vec![
        Example {
            seq: TokenSequence {
                ids: vec![2, 5, 9, 1, 3],
                length: 5,
            },
            target: 0.8,
        },
        Example {
            seq: TokenSequence {
                ids: vec![4, 4, 0, 0, 0],
                length: 2,
            },
            target: 0.1,
        },
        Example {
            seq: TokenSequence {
                ids: vec![7, 0, 0, 0, 0],
                length: 1,
            },
            target: 0.5,
        },
    ];
    let report = grad_check(&model, &batch, 1e-4)?;
    for (name, err) in &report.per_array {
        println!("{name:>10}  max relative error {err:.2e}");
    }
    println!(
        "overall {:.2e} against tolerance {:.0e}: {}",
        report.max_rel_error,
        report.tolerance,
        if report.passed { "ok" } else { "MISMATCH" }
    );
    Ok(())
}
