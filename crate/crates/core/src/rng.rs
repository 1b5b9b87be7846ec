//! Deterministic, splittable random streams.
//!
//! A [`SeedTree`] names a node in a tree of independent streams. Children are
//! derived from the parent key and a label (string or integer) by a 64-bit
//! mixing function, so the stream used by experiment 17 or by the
//! `"balance"` step never depends on how many draws other consumers made or
//! on thread scheduling. Leaves hand out a ChaCha8 generator seeded from the
//! node key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed ^ 0x5EED_7EE5_0000_0001),
        }
    }

    /// Child stream named by a label.
    pub fn child(&self, label: &str) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(fnv1a64(label.as_bytes()))),
        }
    }

    /// Child stream named by an index.
    pub fn index(&self, i: u64) -> Self {
        Self {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(i ^ 0x9E37_79B9_7F4A_7C15)),
        }
    }

    /// A 64-bit seed for APIs that take a plain integer seed.
    pub fn seed(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        let mut state = self.key;
        for chunk in bytes.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
