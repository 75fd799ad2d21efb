//! Labeled random substreams derived from one master seed.
//!
//! Every consumer of randomness asks for its own stream by a label plus a
//! tuple of indices, e.g. `("sim", [iteration, action])`. The stream seed is a
//! SplitMix64 fold of the master seed, an FNV-1a hash of the label and each
//! index in turn. Adding a new consumer with a new label never perturbs the
//! values drawn by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to simulators and samplers everywhere in the crate.
pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Seed of the substream `(label, indices)` under `master`.
pub fn substream_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ fnv1a(label));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i));
    }
    h
}

/// Generator for the substream `(label, indices)` under `master`.
pub fn substream(master: u64, label: &str, indices: &[u64]) -> SimRng {
    SimRng::seed_from_u64(substream_seed(master, label, indices))
}

/// A master seed with a convenience accessor for its substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, label: &str, indices: &[u64]) -> SimRng {
        substream(self.master, label, indices)
    }

    pub fn seed(&self, label: &str, indices: &[u64]) -> u64 {
        substream_seed(self.master, label, indices)
    }
}
