//! Command-line front end for the streamflag anomaly-detection library:
//! run configuration, pipeline orchestration, plotting, and the
//! subcommand drivers behind the `streamflag` binary.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod plot;
