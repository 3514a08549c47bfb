//! Counter-based random streams.
//!
//! Every replication draws from its own ChaCha8 stream selected by
//! `(seed, stream)`, so results do not depend on scheduling or thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::normal::quantile_unchecked;

/// Independent stream `stream` of the generator family keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval (0, 1) with 53-bit resolution.
#[inline]
pub fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate by inverse-CDF transform.
#[inline]
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    quantile_unchecked(open_uniform(rng))
}
