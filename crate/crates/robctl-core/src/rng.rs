//! Reproducible random numbers for path simulation.
//!
//! Every path draws from its own counter-based substream keyed by
//! `(seed, path_index)`: ChaCha8 with the seed as key and the path index as
//! stream number. Adding paths or changing the thread count never alters an
//! individual path, and all results are bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// The RNG substream for one path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// One standard normal draw.
#[inline]
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
