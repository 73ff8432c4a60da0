//! Seedable random streams.
//!
//! Every experiment draws from ChaCha8 generators keyed by a master seed. A
//! unit of work (replicate, restart, chain) gets its own stream through
//! [`stream`]: the master seed fixes the key and the work unit's label path is
//! folded with SplitMix64 into the 64-bit ChaCha stream id. Results therefore
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream labels used by the library. Callers may use any other `u64`s.
pub mod tag {
    pub const REPLICATE: u64 = 1;
    pub const RESTART: u64 = 2;
    pub const TRUTH_GRAPH: u64 = 3;
    pub const PARAMETERS: u64 = 4;
    pub const DATA: u64 = 5;
    pub const SEARCH: u64 = 6;
    pub const SAMPLE: u64 = 7;
    pub const MSEP_SUBSAMPLE: u64 = 8;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for the work unit identified by `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> SimRng {
    let id = path
        .iter()
        .fold(splitmix64(path.len() as u64), |h, &p| splitmix64(h ^ splitmix64(p)));
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}
