//! Replicate RNG streams.
//!
//! Replicate `r` of a run seeded with `master` draws from ChaCha8 keyed by
//! `seed_from_u64(master)` on stream `r`. Streams never overlap, so results
//! do not depend on the order in which replicates are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

/// `split(master, r)`.
pub fn replicate_rng(master: u64, replicate: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replicate);
    rng
}

/// Runs `f(r, rng_r)` for `r in 0..reps` on the current rayon pool and
/// returns the results in replicate order.
pub fn run_replicates<T, F>(master: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(master, r);
            f(r, &mut rng)
        })
        .collect()
}
