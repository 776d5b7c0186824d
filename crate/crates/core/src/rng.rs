//! Counter-derived random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream addressed
//! by a `(seed, stream)` pair. Work that is split across threads picks its
//! stream from a counter (replicate index, trial index, ...) so results never
//! depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Opens stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Folds a list of counters into a single 64-bit seed.
///
/// Uses the splitmix64 finaliser after each absorbed word, so
/// `[a, b]` and `[b, a]` land on unrelated seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        state = mix(state ^ p.wrapping_mul(0xD1B5_4A32_D192_ED03));
    }
    state
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
