//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from [`ChaCha8Rng`]. A stream
//! is identified by a 64-bit seed and a stream id; ChaCha supports 2^64
//! independent streams per key, so replica `i` of an experiment simply uses
//! stream `i`. Results never depend on how rayon schedules work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Address of one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of sub-job `job` from a master seed.
///
/// Sweeps fan out over independent cells (one per `(n, x)` pair, say); each
/// cell gets its own key so that its replicas can reuse stream ids `0..reps`.
pub fn job_seed(seed: u64, job: u64) -> u64 {
    mix64(seed ^ mix64(job.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Run `f` on replicas `0..reps` in parallel and return the results in
/// replica order.
pub fn par_replicas<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps as u64).into_par_iter().map(f).collect()
}
