//! Deterministic random streams, all derived from one master seed.
//!
//! Every consumer of randomness (parameter init, collocation sampling,
//! refinement pools, observation noise) gets its own named stream so that
//! adding draws in one place never shifts another's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        SeedStreams { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Independent generator for a named purpose. The same (seed, name) pair
    /// always yields the same stream, on any platform.
    pub fn stream(&self, name: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.master.to_le_bytes());
        h.update(name.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}
