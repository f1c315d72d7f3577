//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by
//! the run seed, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Stratified,
    Query,
    CrossValidation,
    Synth,
    Test,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Stratified => 1,
            Stream::Query => 2,
            Stream::CrossValidation => 3,
            Stream::Synth => 4,
            Stream::Test => 5,
        }
    }
}

pub fn seeded_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
