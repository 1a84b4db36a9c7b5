//! Seeded, reproducible random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream, derived from a
//! master seed, a stream name and a run index. Two variants that share a seed and
//! a run index therefore see the same channel sequence regardless of how much
//! randomness the other streams consumed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Problem data fixed for a whole experiment (sensing matrix, optimum).
    Model,
    /// Per-slot samples (channel realisations).
    Channel,
    /// Worker service times.
    Delays,
    /// Initial points and warm starts.
    Init,
    /// Monte-Carlo estimates used only for logging.
    Diagnostics,
    /// Random fixtures used by the property checks.
    Check,
}

impl Stream {
    fn code(self) -> u64 {
        match self {
            Stream::Model => 1,
            Stream::Channel => 2,
            Stream::Delays => 3,
            Stream::Init => 4,
            Stream::Diagnostics => 5,
            Stream::Check => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Independent generator for `stream` in Monte-Carlo run `run`.
    pub fn rng(&self, stream: Stream, run: u64) -> StreamRng {
        let mut rng = StreamRng::seed_from_u64(self.master);
        rng.set_stream((stream.code() << 40) | (run & ((1 << 40) - 1)));
        rng
    }
}

/// One draw from `N(0, 1)`.
pub fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_reproduces() {
        let s = SeedTree::new(7);
        let a: Vec<u64> = (0..4).map(|_| s.rng(Stream::Channel, 3).random()).collect();
        let mut r = s.rng(Stream::Channel, 3);
        let b: u64 = r.random();
        assert_eq!(a[0], b);
    }

    #[test]
    fn streams_differ() {
        let s = SeedTree::new(7);
        let a: u64 = s.rng(Stream::Channel, 0).random();
        let b: u64 = s.rng(Stream::Delays, 0).random();
        let c: u64 = s.rng(Stream::Channel, 1).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
