//! Counter-based random streams: one ChaCha stream per `(seed, chain)` pair,
//! so Monte Carlo output does not depend on how chains are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}
