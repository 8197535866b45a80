//! Seeded random streams. One 64-bit seed feeds several independent
//! ChaCha8 streams so that, say, changing the corruption count never moves
//! the graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Identifiers = 1,
    Edges = 2,
    Tree = 3,
    Corruption = 4,
    Crashes = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
