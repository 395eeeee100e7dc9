//! Experiment harness behind the `sgnn-lab` binary: seeded training runs,
//! the comparison sweeps and the verification suites, all emitting CSV.

pub mod cli;
pub mod commands;
mod error;
pub mod runs;
pub mod stats;
pub mod suites;

pub use error::{LabError, LabResult};
