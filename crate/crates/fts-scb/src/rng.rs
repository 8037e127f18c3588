//! Deterministic stream splitting for parallel Monte-Carlo work.
//!
//! Every bootstrap replicate and every simulation run draws from its own
//! ChaCha12 stream whose seed is derived from `(seed, stream, index)` by a
//! SplitMix64 chain. Results are therefore independent of execution order
//! and worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream labels keep unrelated consumers of the same user seed apart.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    BootstrapReplicate = 1,
    SimulationGaussian = 2,
    SimulationStudentT = 3,
    MonteCarloRun = 4,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Derive a 64-bit sub-seed from `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(seed ^ splitmix64(stream as u64));
    splitmix64(a ^ splitmix64(index))
}

/// A fresh generator for the given `(seed, stream, index)` triple.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha12Rng {
    let mut state = derive_seed(seed, stream, index);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha12Rng::from_seed(bytes)
}
