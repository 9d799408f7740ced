//! Deterministic RNG sub-stream derivation.
//!
//! Every randomized operation takes an explicit seed and derives independent
//! ChaCha streams from `(seed, domain, lane, step)`. Parallel chains never
//! share generator state, so results are identical regardless of thread
//! scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical purpose of a sub-stream; keeps draws for different roles
/// independent even when lane/step indices coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Target-measure draws (X ~ pi).
    TargetDraw = 0,
    /// Base-measure draws (Z ~ nu).
    BaseDraw = 1,
    /// Brownian increments of the annealed SDE.
    SdeNoise = 2,
    /// SNIS proposal particles.
    SnisProposal = 3,
    /// Chain initialization.
    InitDraw = 4,
}

/// ChaCha stream keyed by `(seed, domain, lane, step)`.
///
/// Layout of the 64-bit stream id: 8 bits domain, 24 bits lane, 32 bits step.
/// Lanes index chains or batch shards; steps index SDE time steps.
pub fn substream(seed: u64, domain: Domain, lane: u64, step: u64) -> ChaCha8Rng {
    debug_assert!(lane < (1 << 24), "lane index exceeds 24 bits");
    debug_assert!(step < (1 << 32), "step index exceeds 32 bits");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (lane << 32) | step);
    rng
}

/// Plain stream for single-batch operations (`lane = step = 0`).
pub fn stream(seed: u64, domain: Domain) -> ChaCha8Rng {
    substream(seed, domain, 0, 0)
}
