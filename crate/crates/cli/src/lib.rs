//! Experiment drivers behind the `kpzlab` command line.

pub mod config;
pub mod experiments;
pub mod run;
