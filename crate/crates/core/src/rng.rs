//! Counter-based random streams keyed by `(seed, index)`.
//!
//! A stream is a ChaCha8 generator whose 256-bit key is expanded from the
//! master seed and whose 64-bit stream counter is the stream index. Streams are
//! cheap to create, so every replica of an experiment owns its own and results
//! never depend on how replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        RngStream { seed, index }
    }

    /// Child stream `k` of this stream; children of distinct parents or with
    /// distinct `k` land on distinct indices with overwhelming probability.
    pub fn substream(&self, k: u64) -> Self {
        let mixed = splitmix64(self.index ^ splitmix64(k ^ 0xD6E8_FEB8_6659_FD93));
        RngStream {
            seed: self.seed,
            index: mixed,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.index);
        rng
    }
}

/// Runs `f` for replicas `0..n`, each with its own child stream, on the current
/// rayon pool. Output order is replica order, whatever the number of workers.
pub fn replicate<T, F>(stream: &RngStream, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut StreamRng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i).rng();
            f(i, &mut rng)
        })
        .collect()
}
