//! Counter-based random streams.
//!
//! Every replication draws from its own ChaCha20 stream selected by
//! `(seed, stream)`. Streams are independent of scheduling, so a run produces the
//! same numbers on one thread or many.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for one replication: `experiment_id ⊕ replication`.
    pub fn for_replication(seed: u64, experiment_id: u64, replication: u64) -> Self {
        Self::new(seed, experiment_id ^ replication)
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Packs a case index and a grid index into the high bits of an experiment id so
/// that `experiment_id ⊕ replication` never collides for replication < 2³².
pub fn experiment_id(case: usize, point: usize) -> u64 {
    ((case as u64) << 48) | ((point as u64 & 0xffff) << 32)
}
