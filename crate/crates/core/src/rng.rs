//! Seed fan-out into independent, named random streams.
//!
//! Every component draws from its own stream derived from the run seed, so
//! changing how one component consumes randomness never perturbs another.
//! Per-user streams are additionally keyed by epoch and user index, which
//! makes the sampled positives and negatives independent of how users are
//! distributed across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Init,
    Split,
    Positive,
    Negative,
    Assignment,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x696e_6974,
            Stream::Split => 0x7370_6c69,
            Stream::Positive => 0x706f_7369,
            Stream::Negative => 0x6e65_6761,
            Stream::Assignment => 0x6173_7369,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a 64-bit seed from the run seed and a key path.
pub fn derive_seed(seed: u64, stream: Stream, keys: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(stream.tag()));
    for &k in keys {
        h = splitmix(h ^ k);
    }
    h
}

pub fn stream(seed: u64, stream: Stream) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, stream, &[]))
}

/// Stream for one user in one epoch.
pub fn user_stream(seed: u64, stream: Stream, epoch: usize, user: u32) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, stream, &[epoch as u64, user as u64]))
}
