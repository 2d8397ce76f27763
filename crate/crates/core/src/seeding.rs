//! Deterministic seed derivation.
//!
//! Every random stream in a simulation is a ChaCha stream keyed by the master
//! seed and addressed by a 64-bit stream id, so streams never overlap and the
//! draws of a trial do not depend on which worker executes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags mixed into stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Channel = 1,
    Symbols = 2,
    Noise = 3,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for `(trial, kind, index)` under a master seed.
pub fn trial_rng(master: u64, trial: u64, kind: StreamKind, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    let stream = (trial << 24) | ((kind as u64) << 20) | (index & 0xF_FFFF);
    rng.set_stream(stream);
    rng
}

/// Scalar seed derived for a `(trial, kind, index)` triple; used where an API
/// takes a plain integer seed.
pub fn derive_seed(master: u64, trial: u64, kind: StreamKind, index: u64) -> u64 {
    use rand::RngCore;
    trial_rng(master, trial, kind, index).next_u64()
}
