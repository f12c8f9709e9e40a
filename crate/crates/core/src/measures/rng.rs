//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 keystream (a counter-based generator: block
//! `k` is a pure function of key and `k`), keyed through `seed_from_u64`.
//! Sub-streams for trials and sample sizes are keyed by folding the extra
//! indices into the base seed with the SplitMix64 finalizer, so a given
//! `(seed, n, trial)` always reproduces the same draws on any platform.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

pub fn stream(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `base`; order matters.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
