//! Shared inputs for the benchmarks.

use songrec::data::TrainingExample;
use songrec::SeededRng;

/// `count` examples with uniform users, contexts and targets.
pub fn random_examples(count: usize, j: usize, n_songs: usize, n_users: usize, seed: u64) -> Vec<TrainingExample> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| TrainingExample {
            user: rng.below(n_users),
            context: (0..j).map(|_| rng.below(n_songs)).collect(),
            target: rng.below(n_songs),
        })
        .collect()
}
