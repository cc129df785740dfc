//! Dataset statistics for a challenge-format directory.
//!
//! ```text
//! cargo run --example analyze_dataset -- path/to/dataset   # instances.jsonl + truth.jsonl
//! cargo run --example analyze_dataset                      # generated toy data
//! ```

use std::path::PathBuf;

use clickbait_gru::analytics::{
    class_counts, median_label_table, score_box_stats, score_histogram,
};
use clickbait_gru::ingest::{
    find_duplicate_posts, validate_labels, ClassLabel, LabeledDataset, JUDGMENT_LEVELS,
};
use clickbait_gru::synthetic::toy_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = match std::env::args_os().nth(1) {
        Some(dir) => LabeledDataset::load_dir(&PathBuf::from(dir))?,
        None => toy_dataset(500, 42),
    };

    let c = class_counts(&ds);
    println!(
        "{}: {} posts, {} clickbait, {} no-clickbait",
        ds.name, c.total, c.clickbait, c.no_clickbait
    );

    println!("\nmedian judgment by class");
    let table = median_label_table(&ds);
    for (level, row) in JUDGMENT_LEVELS.iter().zip(table) {
        println!(
            "  median {level:.3}: {:>6} clickbait {:>6} no-clickbait",
            row[ClassLabel::Clickbait.index()],
            row[ClassLabel::NoClickbait.index()]
        );
    }

    println!("\ntruthMean five-number summaries");
    for (label, b) in ClassLabel::ALL.iter().zip(score_box_stats(&ds)?) {
        println!(
            "  {:<13} min {:.3} q1 {:.3} median {:.3} q3 {:.3} max {:.3}",
            label.as_str(),
            b.min,
            b.q1,
            b.median,
            b.q3,
            b.max
        );
    }

    let hist = score_histogram(&ds, 10)?;
    println!("\ntruthMean histogram (% of class)");
    let pct = ClassLabel::ALL.map(|l| hist.percentages(l));
    for (i, edge) in hist.bin_edges.windows(2).enumerate() {
        println!(
            "  [{:.1}, {:.1}) {:>5.1} {:>5.1}",
            edge[0], edge[1], pct[0][i], pct[1][i]
        );
    }

    let dups = find_duplicate_posts(&ds);
    println!("\n{} post texts occur more than once", dups.len());
    for g in dups.iter().take(5) {
        println!(
            "  {:>3}x {:?} ({} clickbait)",
            g.count, g.post_text, g.clickbait
        );
    }
    println!(
        "{} records disagree with their median-derived label",
        validate_labels(&ds).len()
    );
    Ok(())
}
