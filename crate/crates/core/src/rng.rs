//! Seed derivation for reproducible, order-independent generation.
//!
//! Every bundle draws from its own ChaCha8 stream, seeded by mixing the
//! master seed with the family id, split name and bundle index. Bundles can
//! then be generated in any order on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type BundleRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of `s`.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn hash_str(s: &str) -> u64 {
    mix64(fnv1a(s))
}

pub fn stream_seed(master_seed: u64, family_id: &str, split: &str, bundle_index: u64) -> u64 {
    let mut h = mix64(master_seed);
    h = mix64(h ^ hash_str(family_id));
    h = mix64(h ^ hash_str(split));
    mix64(h ^ bundle_index)
}

pub fn rng_from_seed(seed: u64) -> BundleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let a = stream_seed(7, "bg-i1_obj-easy_m1_text-none", "train", 3);
        let b = stream_seed(7, "bg-i1_obj-easy_m1_text-none", "train", 3);
        assert_eq!(a, b);
        let x: u64 = rng_from_seed(a).gen();
        let y: u64 = rng_from_seed(b).gen();
        assert_eq!(x, y);
    }

    #[test]
    fn every_input_changes_the_stream() {
        let base = stream_seed(7, "f", "train", 3);
        assert_ne!(base, stream_seed(8, "f", "train", 3));
        assert_ne!(base, stream_seed(7, "g", "train", 3));
        assert_ne!(base, stream_seed(7, "f", "test", 3));
        assert_ne!(base, stream_seed(7, "f", "train", 4));
    }

    #[test]
    fn mix64_known_value() {
        // First output of the reference SplitMix64 generator seeded with 0.
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
    }
}
