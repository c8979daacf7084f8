//! Named, counter-derived random streams.
//!
//! Every random quantity in a run is drawn from a stream identified by the
//! master seed, a tag and a small index tuple. Streams never share state, so
//! the reward noise a user sees at a given round is the same no matter which
//! policy is being simulated or how many decisions that policy drew before.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a 64-bit seed from a master seed, a stream tag and an index tuple.
pub fn derive_seed(master: u64, tag: &str, index: &[u64]) -> u64 {
    let mut h = mix64(master ^ GOLDEN);
    h = mix64(h ^ tag_hash(tag));
    for (k, &i) in index.iter().enumerate() {
        h = mix64(h.wrapping_add(GOLDEN.wrapping_mul(k as u64 + 1)) ^ i);
    }
    h
}

/// Opens the stream `(master, tag, index)`.
pub fn stream(master: u64, tag: &str, index: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, tag, index))
}
