//! Coverage-guided mutational fuzzing for cycle-accurate hardware models.
//!
//! The library is organized around a fuzzing loop: select a seed from the
//! corpus, mutate its chromosome (a flat byte string), translate it into a
//! cycle-by-cycle stimulus, run it on a device under test, and fold the run's
//! coverage back into the corpus. Three executors drive that loop: a serial
//! reference, a lockstep thread pool, and a pipelined pool that overlaps
//! corpus bookkeeping with simulation.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod coverage;
pub mod dut;
pub mod error;
pub mod executor;
pub mod grammar;
pub mod mutation;
pub mod rng;
pub mod stats;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
