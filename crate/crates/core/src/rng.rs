//! Seedable random streams.
//!
//! Every consumer of randomness owns an [`RngStream`] derived from a single
//! trial seed and a stream identifier. Streams never share state, so adding an
//! agent or changing a policy cannot perturb the draws of any other stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifies one independent stream under a trial seed.
///
/// Identifiers compose hierarchically with [`StreamId::child`], e.g. the
/// filter stream of agent 3 at step 17.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId(u64);

impl StreamId {
    pub const WORLD_MOTION: StreamId = StreamId(0x5eed_0001);
    pub const WORLD_INIT: StreamId = StreamId(0x5eed_0002);

    pub const fn new(raw: u64) -> Self {
        StreamId(raw)
    }

    /// Sensing draws made by the world on behalf of one agent.
    pub fn sensing(agent: u32) -> Self {
        StreamId(0x5e45_0000).child(agent as u64)
    }

    /// Decision-making draws (Thompson samples, tie breaks).
    pub fn decision(agent: u32) -> Self {
        StreamId(0xdec1_0000).child(agent as u64)
    }

    /// Filtering draws for one agent at one step. Keyed by step so that replaying
    /// a step reproduces its draws exactly.
    pub fn filter(agent: u32, step: u32) -> Self {
        StreamId(0xf117_0000).child(agent as u64).child(step as u64)
    }

    /// Channel draws for one agent: broadcast coin flips and delays.
    pub fn channel(agent: u32) -> Self {
        StreamId(0xc4a0_0000).child(agent as u64)
    }

    pub fn child(self, index: u64) -> Self {
        StreamId(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A single-owner deterministic random stream (ChaCha8).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream.raw());
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    /// Convenience for tests and one-off draws.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, StreamId::new(0))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    /// Derives an independent stream from this one's seed and id without
    /// consuming any of its draws.
    pub fn fork(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, self.stream.child(index))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
