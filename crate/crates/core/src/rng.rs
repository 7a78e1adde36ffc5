//! Seeded, reproducible random streams.
//!
//! Every experiment uses ChaCha8 seeded from a 64-bit seed. Independent
//! workers (trials, sampling chunks) get their own stream: the same seed with
//! the ChaCha stream id set to the worker index. Nested splitting derives a
//! fresh seed with [`derive_seed`].

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as TreeRng;

pub fn seeded(seed: u64) -> TreeRng {
    TreeRng::seed_from_u64(seed)
}

/// Stream `index` of `seed`. Streams of one seed never overlap.
pub fn stream(seed: u64, index: u64) -> TreeRng {
    let mut rng = TreeRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer over `seed` and `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
