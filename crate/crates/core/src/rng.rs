//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream derived
//! from the episode seed and a fixed domain tag, so adding draws in one
//! place never shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domains of independent streams.
pub mod domain {
    pub const ARRIVALS: u64 = 1;
    pub const LAYER1_EXPLORE: u64 = 2;
    pub const LAYER2_EXPLORE: u64 = 3;
    pub const REPLAY1: u64 = 4;
    pub const REPLAY2: u64 = 5;
    pub const INIT1: u64 = 6;
    pub const INIT2: u64 = 7;
    pub const RANDOM_ORDER: u64 = 8;
    pub const RANDOM_SIZE: u64 = 9;
}

/// Stream `index` of `domain` for `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> Rng {
    // SplitMix64 finalizer to spread nearby seeds.
    let mut z = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(3, domain::ARRIVALS, 0).random();
        let b: u64 = stream(3, domain::ARRIVALS, 0).random();
        let c: u64 = stream(3, domain::ARRIVALS, 1).random();
        let d: u64 = stream(4, domain::ARRIVALS, 0).random();
        let e: u64 = stream(3, domain::REPLAY1, 0).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }
}
