//! Seed derivation for reproducible Monte-Carlo runs.
//!
//! Trial `i` of a run with master seed `s` uses `trial_seed(s, i)`. The mixer
//! is SplitMix64's finaliser applied to `s + (i + 1) * GOLDEN`, so any subset of
//! trials can be re-run on its own and reproduces the same records.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Derives an independent sub-stream seed (e.g. "sampler" vs "adversary")
/// from a trial seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN) ^ 0xD1B5_4A32_D192_ED03))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `f(trial_index, trial_seed)` for `count` trials and returns results in
/// trial order. Uses the rayon pool when the `parallel` feature is on.
pub fn map_trials<T, F>(master: u64, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(|i| f(i, trial_seed(master, i))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(|i| f(i, trial_seed(master, i))).collect()
    }
}
