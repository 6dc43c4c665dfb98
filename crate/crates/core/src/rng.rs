//! Named, reproducible random streams.
//!
//! Every random decision in an experiment draws from a stream derived from one
//! master seed: `derive(master, label, indices)` folds the label bytes and each
//! index through a SplitMix64 finalizer, and the result seeds a ChaCha8
//! generator. Streams for different labels or indices are independent of the
//! order in which they are requested, so adding a stream never perturbs the
//! others.
//!
//! Labels used by the simulator: `init`, `carve`, `partition`, `roles`,
//! `sample` (per round), `train` (per round, client), `attack` (per round,
//! client), `distill` (per round), `noise` (per round).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash `(master, label, indices)` into a 64-bit stream seed.
pub fn derive(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for &b in label.as_bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    // separates label bytes from indices so ("a", [98]) != ("ab", [])
    h = splitmix(h ^ 0xFF00);
    for &i in indices {
        h = splitmix(h ^ i);
    }
    h
}

pub fn stream(master: u64, label: &str, indices: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(master, label, indices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

    pub fn seed(&self, label: &str, indices: &[u64]) -> u64 {
        derive(self.master, label, indices)
    }

    pub fn rng(&self, label: &str, indices: &[u64]) -> StreamRng {
        stream(self.master, label, indices)
    }
}
