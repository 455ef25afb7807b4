//! Seed derivation for reproducible Monte Carlo.
//!
//! Every run takes one 64-bit root seed. Task `k` (a sample chunk, a chain, a
//! point of a sweep) draws from ChaCha8 keyed by the root seed on stream `k`,
//! so results are bit-identical for a fixed chunking no matter how tasks are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable consulted when no `--seed` is given.
pub const SEED_ENV: &str = "RESILIENCE_RG_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed_2007;

/// Generator for task `task` under `root`.
pub fn stream_rng(root: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(task);
    rng
}

/// Root seed for sub-experiment `index` of a composite run (e.g. the k-th
/// probability of a threshold sweep).
pub fn derive(root: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed from `explicit`, else `RESILIENCE_RG_SEED`, else [`DEFAULT_SEED`].
pub fn resolve(explicit: Option<u64>) -> Result<u64, String> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_ENV}={v} is not a u64")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}
