//! Seeded generators of small exact instances and lotteries.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{rat, Instance, Lottery, Matching, Rat};
use crate::twoebm::all_matchings;

/// Values `k / denom` with `k` uniform in `0..=denom`.
pub fn random_instance<R: Rng>(rng: &mut R, n_agents: usize, n_items: usize, denom: i64) -> Instance {
    let values = (0..n_agents)
        .map(|_| (0..n_items).map(|_| rat(rng.gen_range(0..=denom), denom)).collect())
        .collect();
    Instance::new(values).expect("nonnegative values")
}

/// Rows with positive integer weights in `1..=denom`, normalized to sum to one.
pub fn random_normalized_instance<R: Rng>(rng: &mut R, n: usize, denom: i64) -> Instance {
    let values: Vec<Vec<Rat>> =
        (0..n).map(|_| (0..n).map(|_| rat(rng.gen_range(1..=denom), 1)).collect()).collect();
    Instance::new(values).expect("positive values").normalize()
}

/// A lottery over `1..=max_support` distinct random matchings with random
/// rational weights.
pub fn random_matching_lottery<R: Rng>(rng: &mut R, n: usize, max_support: usize) -> Lottery<Rat> {
    let mut all: Vec<Matching> = all_matchings(n).collect();
    all.shuffle(rng);
    let size = rng.gen_range(1..=max_support.min(all.len()).max(1));
    let weights: Vec<i64> = (0..size).map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    let support = all.into_iter().take(size).zip(weights).map(|(m, w)| (m, rat(w, total))).collect();
    Lottery::from_matchings(support).expect("weights sum to one")
}
