//! Deterministic seed derivation.
//!
//! Every random object in the crate is driven by a `ChaCha8Rng` seeded from a
//! single `u64`. Replica and purpose seeds are derived from a master seed by
//! SplitMix64 mixing, so any replica can be regenerated in isolation and the
//! result does not depend on scheduling order.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of stream labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &label| splitmix(acc ^ splitmix(label.wrapping_add(GOLDEN))))
}

/// Seed of replica `index` under `master`.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, &[index])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_separates_paths() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        assert_ne!(replica_seed(0, 0), replica_seed(0, 1));
    }

    #[test]
    fn same_seed_same_stream() {
        let a: [u64; 4] = rng_from_seed(42).random();
        let b: [u64; 4] = rng_from_seed(42).random();
        assert_eq!(a, b);
    }
}
