//! Counter-keyed random streams.
//!
//! Every draw in the crate comes from a ChaCha8 stream whose 256-bit key is
//! `(seed, purpose, place index, sample index)`. Distinct keys give
//! independent streams, so results do not depend on the order in which
//! samples or places are visited, nor on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for; keeps e.g. the two sides of an identity check
/// statistically independent under the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    ZetaFactor,
    MomentEstimate(u32),
    ExitTime,
    ExitPosition,
    BallChain,
    LawCheck(u32),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::ZetaFactor => 1,
            Purpose::MomentEstimate(k) => 0x100 | k as u64,
            Purpose::ExitTime => 2,
            Purpose::ExitPosition => 3,
            Purpose::BallChain => 4,
            Purpose::LawCheck(k) => 0x200 | k as u64,
        }
    }
}

pub fn keyed_stream(seed: u64, purpose: Purpose, place: u64, sample: u64) -> StreamRng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, purpose.code(), place, sample]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
