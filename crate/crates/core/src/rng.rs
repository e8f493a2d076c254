//! Seeded random streams.
//!
//! Every job gets its own ChaCha stream selected by a counter on top of the
//! run seed, so adding jobs never changes the draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream `job` of the generator seeded by `seed`.
pub fn job_rng(seed: u64, job: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(job);
    rng
}
