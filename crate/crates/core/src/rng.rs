//! Keyed random substreams.
//!
//! A [`StreamKey`] is a 64-bit path hash. Children are derived by mixing an
//! index or label into the parent, and the key seeds a ChaCha8 generator, so
//! every replication, coordinate and cluster owns an independent stream no
//! matter which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        Self {
            seed: master_seed,
            path: splitmix64(master_seed ^ 0x5E_ED0F_4A3C),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.seed
    }

    /// Derive the child stream with the given index.
    pub fn child(self, index: u64) -> Self {
        let mixed = splitmix64(self.path.rotate_left(17) ^ splitmix64(index ^ 0xA5A5_5A5A_C3C3_3C3C));
        Self {
            seed: self.seed,
            path: mixed,
        }
    }

    /// Derive a named child stream; used to separate modules and experiments.
    pub fn named(self, label: &str) -> Self {
        self.child(fnv1a(label.as_bytes()))
    }

    pub fn rng(self) -> SimRng {
        let mut bytes = [0u8; 32];
        let mut state = self.path;
        for chunk in bytes.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}
