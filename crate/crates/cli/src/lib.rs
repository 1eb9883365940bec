//! Command-line driver: run configuration and the two analysis pipelines.

pub mod commands;
pub mod config;

pub use commands::{cmd_constraints, cmd_energy, CliError, ConstraintsArgs, EnergyArgs};
pub use config::{ConfigError, ModelKind, RunConfig};
