//! Deterministic RNG streams.
//!
//! Every random decision draws from a ChaCha8 stream addressed by
//! (root seed, purpose, index). Purposes get disjoint stream ids, so adding
//! draws to one pipeline stage never perturbs another, and per-session
//! streams make parallel simulation order-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_CATALOG: u64 = 1;
pub const STREAM_EXPERT_PROFILE: u64 = 2;
pub const STREAM_TRAJECTORY: u64 = 3;
pub const STREAM_USER_PROFILE: u64 = 4;
pub const STREAM_SESSION: u64 = 5;
pub const STREAM_AGENT: u64 = 6;

const INDEX_BITS: u32 = 48;

/// A ChaCha8 generator for `purpose`/`index` under the root seed.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(purpose < (1 << (64 - INDEX_BITS)));
    debug_assert!(index < (1 << INDEX_BITS));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << INDEX_BITS) | index);
    rng
}

/// Stream index for a (arm, session) pair; arms stay under 2^8 in practice.
pub fn arm_session_index(arm: usize, session: usize) -> u64 {
    ((arm as u64) << 32) | session as u64
}
