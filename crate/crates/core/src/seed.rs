//! Seed derivation for reproducible, worker-count independent Monte Carlo.
//!
//! A child seed is `splitmix64(master + GOLDEN * (stream + 1))`. The same
//! `(master, stream)` pair always yields the same child seed on every
//! platform, so replicate `k` of an experiment sees the same random stream no
//! matter which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(stream.wrapping_add(1))))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
