//! Seeded random streams.
//!
//! Every stochastic task (a run, a grid cell) draws from its own ChaCha
//! stream selected by `(master seed, task index)`, so results do not depend
//! on how tasks are spread over worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn task_rng(master_seed: u64, task: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(task);
    rng
}

/// Master seed of an independent sub-experiment, e.g. the frequency runs
/// that follow a reach estimate under the same user seed.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(u64::MAX - label);
    rng.next_u64()
}
