//! Seeded random streams.
//!
//! Every consumer draws from a ChaCha8 generator keyed by `(seed, stream)`.
//! ChaCha is counter based, so stream `i` is independent of how many values
//! any other stream consumed. Noise injection uses one stream per example
//! index, which makes it order independent and trivially parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags mixed into seeds so that different consumers of the same
/// user seed never share a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Noise = 1,
    Shuffle = 2,
    Init = 3,
    Data = 4,
    TestData = 5,
}

/// Generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser; used to derive child seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, purpose: Purpose) -> u64 {
    mix(seed ^ mix(purpose as u64))
}
