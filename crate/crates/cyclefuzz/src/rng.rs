//! Deterministic random streams derived from a campaign master seed.
//!
//! Every input slot of every iteration gets its own ChaCha stream keyed by
//! `(master_seed, iteration, slot)`. Workers and the coordinator can then
//! draw random values in any scheduling order without perturbing each other,
//! which is what makes multi-threaded campaigns bit-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams disjoint when two purposes share coordinates.
const TAG_SLOT: u64 = 0x736c_6f74; // "slot"

fn seed_bytes(master_seed: u64, iteration: u64, slot: u64, tag: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&iteration.to_le_bytes());
    seed[16..24].copy_from_slice(&slot.to_le_bytes());
    seed[24..32].copy_from_slice(&tag.to_le_bytes());
    seed
}

/// Stream that drives seed selection and mutation for one input slot.
pub fn slot_stream(master_seed: u64, iteration: u64, slot: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(seed_bytes(master_seed, iteration, slot, TAG_SLOT))
}
