//! Small generated datasets in the challenge format, for examples, tests and smoke runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{Judgment, LabeledDataset, LabeledPost, PostRecord};

const BAIT_OPENERS: &[&str] = &[
    "You won't believe",
    "This is why",
    "10 things you need to know about",
    "What happens next will shock you:",
    "Here's the real reason",
    "Quote of the day:",
];

const NEWS_OPENERS: &[&str] = &[
    "Parliament votes on",
    "Officials confirm",
    "Quarterly report shows",
    "Court rules on",
    "Police investigate",
    "Markets close higher after",
];

const TOPICS: &[&str] = &[
    "the new budget",
    "climate talks in Paris",
    "a celebrity wedding",
    "the opening bell",
    "local elections",
    "smartphone sales",
    "the transfer window",
    "a rare solar eclipse",
    "rising rent prices",
    "the championship final",
];

/// Judgment scores drawn around the class: clickbait posts mostly get 2/3 or 1.
fn scores_for<R: Rng>(clickbait: bool, rng: &mut R) -> [f64; 5] {
    let levels = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    loop {
        let mut s = [0.0; 5];
        for v in &mut s {
            let hi = rng.random_bool(if clickbait { 0.8 } else { 0.15 });
            *v = if hi {
                levels[rng.random_range(2..4)]
            } else {
                levels[rng.random_range(0..2)]
            };
        }
        let mut sorted = s;
        sorted.sort_by(f64::total_cmp);
        if (sorted[2] >= 0.5) == clickbait {
            return s;
        }
    }
}

/// A dataset of `n` posts, roughly a quarter clickbait, deterministic in `seed`.
pub fn toy_dataset(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let clickbait = rng.random_bool(0.25);
        let opener = if clickbait {
            BAIT_OPENERS
        } else {
            NEWS_OPENERS
        }
        .choose(&mut rng)
        .copied()
        .unwrap_or_default();
        let topic = TOPICS.choose(&mut rng).copied().unwrap_or_default();
        let text = format!("{opener} {topic}");
        let judgment = Judgment::from_scores(scores_for(clickbait, &mut rng))
            .expect("generated scores are on the judgment levels");
        records.push(LabeledPost {
            post: PostRecord {
                id: format!(
                    "{}",
                    800_000_000_000_000_000u64 + seed * 1_000_000 + i as u64
                ),
                post_text: vec![text.clone()],
                post_timestamp: format!("Tue Jun 09 16:{:02}:10 +0000 2015", i % 60),
                post_media: Vec::new(),
                target_title: format!("{topic}: full story"),
                target_description: format!("Everything about {topic}."),
                target_keywords: topic.replace(' ', ","),
                target_paragraphs: vec![format!("An article about {topic}.")],
                target_captions: Vec::new(),
            },
            judgment,
        });
    }
    LabeledDataset {
        name: format!("toy-{seed}"),
        records,
    }
}
