//! Regression and classification metrics for a set of scores.

use clickbait_gru::ingest::Judgment;
use clickbait_gru::metrics::{evaluate, TruthLabels};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let third = 1.0 / 3.0;
    let truth = [
        [0.0, 0.0, third, 0.0, 0.0],
        [1.0, 2.0 * third, 1.0, 2.0 * third, 1.0],
        [third, 2.0 * third, 2.0 * third, 0.0, 1.0],
        [0.0, third, 0.0, 0.0, third],
        [0.0, 0.0, 2.0 * third, 2.0 * third, 2.0 * third],
    ]
    .into_iter()
    .map(Judgment::from_scores)
    .collect::<Result<Vec<_>, _>>()?;
    let preds = [0.1, 0.8, 0.55, 0.3, 0.4];

    for labels in [TruthLabels::Class, TruthLabels::MeanThreshold] {
        let r = evaluate(&preds, &truth, 0.5, labels)?;
        println!("labels from {labels:?}:");
        println!("{}", serde_json::to_string_pretty(&r)?);
    }
    Ok(())
}
