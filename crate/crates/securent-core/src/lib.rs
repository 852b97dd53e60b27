//! Privacy-preserving network tomography lab.
//!
//! The pipeline runs left to right: a [`topology::Topology`] and its monitor
//! pairs give a routing matrix, [`measurement`] synthesizes per-round path
//! delays, [`obfuscation`] adds fake-topology noise, [`attacker`] tries to
//! recover the topology from the series, and [`evaluation`] scores both the
//! attacker and a trusted user who knows the real routing.

pub mod attacker;
pub mod error;
pub mod evaluation;
pub mod measurement;
pub mod obfuscation;
pub mod seed;
pub mod topology;

pub use error::{Error, Result};
