//! Marked edge walk: Metropolis-Hastings sampling of balanced connected graph
//! partitions under user-specified target distributions.

pub mod chain;
pub mod diagnostics;
pub mod energy;
pub mod enumeration;
pub mod graph;
pub mod spanning;
pub mod state;
pub mod walk;

/// Version stamped on every JSON object the engine writes.
pub const SCHEMA_VERSION: u32 = 1;
