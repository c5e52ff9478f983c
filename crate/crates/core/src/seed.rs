//! Seed derivation and named random streams.
//!
//! Every random quantity in the workspace is drawn from a ChaCha8 generator
//! seeded by [`derive_seed`]. A base seed is mixed with a fixed [`Stream`]
//! tag and optional indices through SplitMix64 finalizers, so e.g. the
//! disorder and the field built from the same seed are independent and
//! per-trial seeds do not depend on scheduling order.
//!
//! | stream       | tag |
//! |--------------|-----|
//! | Disorder     | 1   |
//! | Field        | 2   |
//! | Init         | 3   |
//! | Perturbation | 4   |
//! | Data         | 5   |
//! | Weights      | 6   |
//! | Batches      | 7   |
//! | Noise        | 8   |
//! | Subsample    | 9   |
//! | Trial        | 10  |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Disorder = 1,
    Field = 2,
    Init = 3,
    Perturbation = 4,
    Data = 5,
    Weights = 6,
    Batches = 7,
    Noise = 8,
    Subsample = 9,
    Trial = 10,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with each element of `path` in order.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

/// Generator for `stream` under `seed`, optionally indexed (trial number, regime, ...).
pub fn stream_rng(seed: u64, stream: Stream, index: &[u64]) -> StreamRng {
    let mut path = Vec::with_capacity(index.len() + 1);
    path.push(stream as u64);
    path.extend_from_slice(index);
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &path))
}
