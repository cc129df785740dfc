//! Named random streams derived from one user seed.
//!
//! Every consumer of randomness draws from its own ChaCha stream so that, for
//! example, changing the dropout rate does not perturb the data split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Split,
    Init,
    Embedding,
    Shuffle,
    Dropout,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Split => 1,
            Stream::Init => 2,
            Stream::Embedding => 3,
            Stream::Shuffle => 4,
            Stream::Dropout => 5,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
