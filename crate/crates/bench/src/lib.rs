//! Seeded inputs shared by the benchmarks.

use ief::testkit::random_normalized_instance;
use ief::twoebm::EdgePairWeights;
use ief::Instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x1ef;

/// Normalized `n x n` instance with values on a grid of `1 / 6`.
pub fn instance(n: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    random_normalized_instance(&mut rng, n, 6)
}

/// Edge-pair weights drawn uniformly from `[-1, 1)`.
pub fn edge_pair_weights(n: usize, seed: u64) -> EdgePairWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64) << 8);
    EdgePairWeights::from_fn(n, |_, _, _, _| rng.gen_range(-1.0..1.0))
}
