//! Stratified 70/30 split that keeps the clickbait ratio on both sides.

use clickbait_gru::analytics::class_counts;
use clickbait_gru::ingest::{stratified_quotas, stratified_split};
use clickbait_gru::synthetic::toy_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = toy_dataset(1000, 7);
    let c = class_counts(&ds);
    println!(
        "full: {} posts, clickbait share {:.4}",
        c.total,
        c.clickbait as f64 / c.total as f64
    );

    let quotas = stratified_quotas([c.clickbait, c.no_clickbait], 0.3);
    println!(
        "test quotas: {} clickbait, {} no-clickbait",
        quotas[0], quotas[1]
    );

    let (train, test) = stratified_split(&ds, 0.3, 0)?;
    for (name, part) in [("train", &train), ("test", &test)] {
        let c = class_counts(part);
        println!(
            "{name:>5}: {:>4} posts, clickbait share {:.4}",
            c.total,
            c.clickbait as f64 / c.total as f64
        );
    }

    let dir = tempfile::tempdir()?;
    train.write_dir(&dir.path().join("train"))?;
    test.write_dir(&dir.path().join("test"))?;
    println!(
        "wrote instances.jsonl/truth.jsonl pairs under {}",
        dir.path().display()
    );
    Ok(())
}
