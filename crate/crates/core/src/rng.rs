//! Seeded, splittable randomness.
//!
//! Every consumer draws from a ChaCha8 stream selected by `(seed, role,
//! block)`. Streams for different roles or blocks never overlap, so any
//! one component can be regenerated on its own and block-parallel runs are
//! independent of how blocks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Logical consumers of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Role {
    AlicePhases = 1,
    BobBases = 2,
    ChannelNoise = 3,
    EveNoise = 4,
    Disclosure = 5,
    CodeConstruction = 6,
    HashSeed = 7,
    TraceNoise = 8,
    Calibration = 9,
    Auxiliary = 10,
}

/// Root of all substreams for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed(pub u64);

impl StreamSeed {
    /// The generator for `role` and block index `block` (< 2^48).
    pub fn stream(self, role: Role, block: u64) -> SimRng {
        debug_assert!(block < 1 << 48);
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(((role as u64) << 48) | block);
        rng
    }

    /// A child seed, for handing an independent root to a sub-experiment.
    pub fn child(self, index: u64) -> StreamSeed {
        // splitmix64 finaliser
        let mut z = self.0 ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        StreamSeed(z ^ (z >> 31))
    }
}
