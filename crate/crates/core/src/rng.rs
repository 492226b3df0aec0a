//! Seeded random streams.
//!
//! A single 64-bit seed fans out into independent ChaCha streams: stream 0
//! draws graphs, stream `AGENT_STREAM_BASE + k` draws agent `k`'s
//! observations. Adding agents never perturbs the draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRAPH_STREAM: u64 = 0;
const AGENT_STREAM_BASE: u64 = 1 << 32;
const AUX_STREAM: u64 = u64::MAX;

pub type StreamRng = ChaCha8Rng;

pub fn graph_stream(seed: u64) -> StreamRng {
    stream(seed, GRAPH_STREAM)
}

pub fn agent_stream(seed: u64, agent: usize) -> StreamRng {
    stream(seed, AGENT_STREAM_BASE + agent as u64)
}

/// Stream for everything that is neither a graph nor an observation
/// (random likelihood tables, test fixtures).
pub fn aux_stream(seed: u64) -> StreamRng {
    stream(seed, AUX_STREAM)
}

fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
