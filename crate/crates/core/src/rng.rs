//! Seedable, splittable random streams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream whose seed is
//! derived from `(master seed, agent id, purpose tag, ...)`. Separate streams per
//! agent and per purpose keep counterfactual comparisons clean: an adversary's
//! coin flips can never perturb an agent's value sequence.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Purpose tag for an agent's value/state path.
pub const PURPOSE_VALUES: u64 = 1;
/// Purpose tag for an agent strategy's request coins.
pub const PURPOSE_AGENT_COIN: u64 = 2;
/// Purpose tag for adversary decision coins.
pub const PURPOSE_ADVERSARY_COIN: u64 = 3;
/// Purpose tag for replication seed derivation.
pub const PURPOSE_REPLICATION: u64 = 4;

/// SplitMix64 finalizer; the standard 64-bit mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a full 256-bit seed from a master seed and a list of stream labels.
pub fn derive_seed(master: u64, parts: &[u64]) -> [u8; 32] {
    let mut state = master ^ 0xD6E8_FEB8_6659_FD93;
    let _ = splitmix64(&mut state);
    for &p in parts {
        state ^= p;
        let _ = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    seed
}

/// A named sub-stream of the master seed.
pub fn stream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, parts))
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[0, n)`.
pub fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    debug_assert!(n > 0);
    // Modulo bias is irrelevant at simulation scale for the small n used here.
    rng.next_u64() % n
}
