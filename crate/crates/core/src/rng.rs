//! Counter-based, splittable random streams.
//!
//! Every stream is addressed by `(master_seed, stream_id)` and yields a fixed
//! sequence of words; the `counter` is the number of 64-bit words consumed so
//! far. Rounds use their index as `stream_id`, so executing rounds in any
//! order or on any thread produces identical draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for the public-discussion (sifting) phase.
pub const SIFT_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    counter: u64,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(master_seed);
        core.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            counter: 0,
            core,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Index of the branch selected from a discrete distribution.
    ///
    /// Branches with probability below `1e-15` are never selected.
    pub fn choose(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64() * probs.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &p) in probs.iter().enumerate() {
            if p < 1e-15 {
                continue;
            }
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
        last
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.core.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let word = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}
