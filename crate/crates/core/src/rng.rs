//! Deterministic seed derivation.
//!
//! Every random stream is keyed by `(master seed, stream kind, counter)` and
//! mixed with SplitMix64, so parallel workers draw identical samples no matter
//! how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Prior = 1,
    Noise = 2,
    Perturb = 3,
    Shuffle = 4,
    Init = 5,
    Validation = 6,
    Test = 7,
    Baseline = 8,
    Round = 9,
    Instance = 10,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ (stream as u64)).wrapping_add(index))
}

pub fn stream(master: u64, kind: Stream, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, kind, index))
}
