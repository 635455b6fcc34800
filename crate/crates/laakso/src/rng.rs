//! Deterministic, order-independent random streams.
//!
//! Every sampled object in the crate draws from a stream derived from a
//! master seed and a list of integer tags (experiment id, row index, sample
//! index, ...). Sample `i` therefore sees the same bits no matter how many
//! threads run or in which order rows complete.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of splitmix64, the standard 64-bit mixer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha stream keyed by `(master, tags...)`.
///
/// Distinct tag lists give statistically independent streams; equal tag
/// lists give identical streams.
pub fn derived_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = mix(master ^ 0x5851_f42d_4c95_7f2d);
    for &t in tags {
        state = mix(state ^ mix(t));
    }
    ChaCha8Rng::seed_from_u64(state)
}
