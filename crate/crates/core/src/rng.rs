//! Seeded, counter-based random streams.
//!
//! Every stochastic routine derives its generator from `(seed, stream)` so
//! that independent replicates can be regenerated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent ChaCha8 substream `stream` of the master `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
