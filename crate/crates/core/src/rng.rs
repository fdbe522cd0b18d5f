//! Deterministic seed splitting. A single root seed fans out into independent
//! per-task generators, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Child node for `index`; children of distinct indices are independent.
    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree { root: mix(self.root ^ mix(index.wrapping_add(1))) }
    }

    pub fn rng(&self) -> TaskRng {
        ChaCha8Rng::seed_from_u64(mix(self.root))
    }

    pub fn task_rng(&self, index: u64) -> TaskRng {
        self.child(index).rng()
    }
}
