//! Code farming: genetic programming against a target dataset that is
//! re-randomized every generation, so that selection accumulates generic
//! building blocks rather than solutions to one problem.
//!
//! The main process lives in [`farm`]; [`demo`] is a minimal bit-genotype
//! experiment showing the effect, and [`replicator`] the allele-frequency
//! recurrence that explains it.

pub mod bits;
pub mod datasets;
pub mod demo;
pub mod elites;
pub mod error;
pub mod evolution;
pub mod farm;
pub mod fitness;
pub mod replicator;
pub mod rng;
pub mod snapshot;
pub mod vm;

pub use bits::BitString;
pub use error::{Error, Result};
pub use farm::{FarmConfig, FarmState};
pub use rng::Stream;
pub use vm::Genome;
