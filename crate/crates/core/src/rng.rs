//! Seeded randomness with per-player substreams.
//!
//! All stochastic code in the crate draws from ChaCha12 streams derived from a
//! single master seed, so every protocol run, sweep, and Monte Carlo estimate
//! is a pure function of (inputs, master seed) regardless of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Fixed stream labels; player substreams start above `PLAYER_BASE`.
pub const STREAM_PUBLIC_STRINGS: u64 = 1;
pub const STREAM_PARTITION: u64 = 2;
pub const STREAM_SERVER: u64 = 3;
pub const STREAM_DATA: u64 = 4;
pub const PLAYER_BASE: u64 = 1 << 32;

/// Derives independent ChaCha12 streams from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    master: u64,
}

impl Substreams {
    pub fn new(master: u64) -> Self {
        Substreams { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream for a fixed label. Labels must not collide with player streams.
    pub fn labeled(&self, label: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master);
        rng.set_stream(label.into());
        rng
    }

    /// Player `i`'s own stream: independent of every other player's, so the
    /// simulation can run players in any order or in parallel.
    pub fn player(&self, i: usize) -> ChaCha12Rng {
        self.labeled(PLAYER_BASE + i as u64)
    }
}
