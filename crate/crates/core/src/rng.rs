//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by
//! the master seed, a domain tag and an index (repetition, slot, ...), so
//! any slot can be regenerated on its own and work can be spread across
//! threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Topology = 1,
    Channel = 2,
    Solver = 3,
    Calibration = 4,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) ^ index);
    rng
}

/// Index for per-slot streams within a repetition.
pub fn slot_index(rep: u64, slot: u64) -> u64 {
    (rep << 32) | (slot & 0xffff_ffff)
}
