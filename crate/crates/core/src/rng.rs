//! Seed plumbing. Every random draw in the crate comes from a [`Rng`] derived
//! from a run seed plus a fixed salt, so independent consumers never share a stream.

use rand::SeedableRng;

pub type Rng = rand_chacha::ChaCha8Rng;

/// Salts for the independent streams a training run uses.
pub mod salt {
    pub const INIT: u64 = 0x01;
    pub const RESAMPLE: u64 = 0x02;
    pub const DATA: u64 = 0x03;
    pub const DROPOUT: u64 = 0x04;
    pub const SUPPORT: u64 = 0x05;
    pub const SUPPORT_DROPOUT: u64 = 0x06;
    pub const SPLIT: u64 = 0x07;
    pub const IMBALANCE: u64 = 0x08;
    pub const SYNTHETIC: u64 = 0x09;
    pub const MIXUP: u64 = 0x0a;
}

/// splitmix64 finalizer over `seed ^ salt`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_from(seed: u64, salt: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, salt))
}
