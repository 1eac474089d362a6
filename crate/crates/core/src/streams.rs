//! Per-replicate random number streams.
//!
//! ChaCha is counter-based, so giving every Monte Carlo replicate its own
//! stream of one master-seeded generator yields draws that do not depend
//! on execution order. Replicates can then run on any number of threads
//! and still reproduce bit-identically.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the synthetic lab.
pub type StreamRng = ChaCha8Rng;

/// An independent stream for `replicate` under `master_seed`.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}
