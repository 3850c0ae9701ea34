//! Seed derivation.
//!
//! Every random stream in the pipeline is derived from one root seed. A stage
//! seed is `mix(root ^ fnv1a(stage))`, and per-item generators (one per node
//! during walk generation, for instance) use `mix(stage_seed ^ mix(item))`.
//! `mix` is the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for a named pipeline stage.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    mix(root ^ fnv1a(stage))
}

/// Seed for item `index` within a stage.
pub fn item_seed(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_get_distinct_seeds() {
        assert_ne!(stage_seed(7, "split"), stage_seed(7, "walks"));
        assert_ne!(stage_seed(7, "split"), stage_seed(8, "split"));
        assert_eq!(stage_seed(7, "split"), stage_seed(7, "split"));
        assert_ne!(item_seed(1, 0), item_seed(1, 1));
    }
}
