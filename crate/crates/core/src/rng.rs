// SPDX-License-Identifier: Apache-2.0

//! Named random streams derived from a single master seed.
//!
//! Every consumer of randomness (graph layout, task data per agent, the
//! activation schedule, ...) draws from its own ChaCha stream, so changing
//! how much one consumer draws never shifts another one's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Shared task-level draws (layouts, target models, sizes).
    Task,
    /// Per-agent local data.
    AgentData(usize),
    /// Per-agent held-out test data.
    AgentTest(usize),
    /// Activation schedule and neighbor selection.
    Schedule,
    /// Inner solvers that need randomness.
    Solver,
}

impl Stream {
    fn id(self) -> u64 {
        const AGENT_SPACE: u64 = 1 << 32;
        match self {
            Stream::Task => 1,
            Stream::Schedule => 2,
            Stream::Solver => 3,
            Stream::AgentData(i) => AGENT_SPACE + i as u64,
            Stream::AgentTest(i) => 2 * AGENT_SPACE + i as u64,
        }
    }
}

/// Independent generator for `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream.id());
    rng
}

/// Derive the seed of the `index`-th sub-experiment (instance, run, ...)
/// from a master seed. SplitMix64 finalizer.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
