//! Seeded random streams.
//!
//! Every random quantity is drawn from a `ChaCha8Rng` seeded from a 64-bit
//! token. Sub-streams are derived with [`mix`] so that one trial seed fans
//! out into independent streams for the matrix, signal, channel and noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of words into one seed: `h ← splitmix64(h ⊕ w)` per word,
/// starting from `splitmix64(len)`.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(words.len() as u64), |h, &w| splitmix64(h ^ w))
}

/// Draws `len` i.i.d. standard normal values.
pub fn normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}
