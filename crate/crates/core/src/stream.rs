//! Deterministic random streams.
//!
//! Every Monte Carlo loop in the crate draws its randomness from a
//! [`StreamSeed`]. A seed is a 64-bit value; `seed.rng(i)` returns a ChaCha8
//! generator keyed by the seed (expanded to 256 bits with SplitMix64) and
//! positioned on ChaCha stream `i`. ChaCha is counter based, so the stream for
//! replicate `i` depends only on `(seed, i)` and never on which thread runs it
//! or how many replicates run before it.
//!
//! Nested experiments derive child seeds with [`StreamSeed::child`], which
//! mixes a domain tag and an index into the parent seed. Domain tags keep the
//! bootstrap, the data generator and the oracles from ever sharing a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags for [`StreamSeed::child`].
pub mod domain {
    pub const BOOTSTRAP: u64 = 0x6b6f_6f74;
    pub const SIGMA: u64 = 0x7369_676d;
    pub const CONDITIONAL: u64 = 0x636f_6e64;
    pub const DATASET: u64 = 0x6461_7461;
    pub const TRUTH: u64 = 0x7472_7574;
    pub const THETA: u64 = 0x7468_6574;
    pub const ORACLE: u64 = 0x6f72_6163;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed(u64);

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamSeed {
    pub const fn new(seed: u64) -> Self {
        StreamSeed(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Seed for a nested experiment, e.g. dataset `index` of a scenario.
    pub fn child(self, tag: u64, index: u64) -> StreamSeed {
        let mut state = self.0 ^ tag.rotate_left(17);
        let a = splitmix64(&mut state);
        let mut state = a ^ index;
        StreamSeed(splitmix64(&mut state))
    }

    /// Generator for stream `index` under this seed.
    pub fn rng(self, index: u64) -> ChaCha8Rng {
        let mut state = self.0;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

impl From<u64> for StreamSeed {
    fn from(seed: u64) -> Self {
        StreamSeed(seed)
    }
}
