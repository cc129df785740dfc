//! Tokenizing, building a vocabulary, loading GloVe vectors and encoding posts.

use std::io::Cursor;

use clickbait_gru::text::{encode, load_glove, tokenize, Vocabulary};

// A few lines in the GloVe text format: a token followed by its vector.
const GLOVE: &str = "\
you 0.1 -0.2 0.3 0.05
won't 0.4 0.0 -0.1 0.2
believe -0.3 0.1 0.1 0.0
! 0.0 0.0 0.5 -0.5
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let posts = [
        "You won't BELIEVE what happened next!",
        "Parliament votes on the new budget",
        "You need to see this",
    ];
    let corpus: Vec<Vec<String>> = posts.iter().map(|p| tokenize(p)).collect();
    for (p, toks) in posts.iter().zip(&corpus) {
        println!("{p:?} -> {toks:?}");
    }

    let vocab = Vocabulary::build(&corpus, 1)?;
    println!("\nvocabulary of {} ids: {:?}", vocab.len(), vocab.tokens());

    let glove = load_glove::<f32, _>(Cursor::new(GLOVE), &vocab, 4, 0)?;
    println!("{} of {} tokens found in GloVe", glove.matched, vocab.len());
    println!(
        "row for \"you\": {:?}",
        glove.table.row(vocab.id("you").unwrap())
    );

    let seq = encode(&tokenize("You won't believe the quiz"), &vocab, 8);
    println!("\nencoded: ids {:?}, length {}", seq.ids, seq.length);
    Ok(())
}
