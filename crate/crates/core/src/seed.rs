//! Deterministic seed splitting.
//!
//! Every random draw descends from one root seed. A splitter is a 64-bit
//! state; `child(i)` mixes the state with the index through SplitMix64, and
//! `rng()` seeds a ChaCha8 stream from the state. Jobs are addressed by their
//! index, never by the worker that runs them, so results do not depend on the
//! size of the thread pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSplitter {
    state: u64,
}

impl SeedSplitter {
    pub fn new(root: u64) -> Self {
        SeedSplitter { state: root }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn child(&self, index: u64) -> SeedSplitter {
        SeedSplitter {
            state: splitmix64(self.state ^ splitmix64(index.wrapping_add(1).wrapping_mul(GOLDEN))),
        }
    }

    /// Child keyed by a label, for separating subsystems of one run.
    pub fn named(&self, label: &str) -> SeedSplitter {
        let h = label
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3));
        self.child(h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.state)
    }
}
