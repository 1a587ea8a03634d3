//! Experiment runner and verification tools for the `dualprox` solver.

pub mod checks;
pub mod cli;
pub mod config;
pub mod output;
pub mod properties;
pub mod runner;

pub use cli::{run, Cli, Command, ExitCode};
pub use config::{ConfigError, RunConfig};
pub use output::{KeyKind, Row};
pub use properties::PropertyResult;
pub use runner::SweepResult;
