//! Seeded Gridworld experiments on top of `osiris-core`.
//!
//! - [`environments`]: canonical Gridworlds and the JSON interchange format
//! - [`config`]: experiment configuration and flag overrides
//! - [`experiments`]: benchmark, consistency sweep, relevance maps, diagnostics
//! - [`output`]: CSV/JSON writers with provenance headers
//! - [`commands`]: the subcommands of the `osiris` binary

pub mod commands;
pub mod config;
pub mod environments;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, Overrides};
pub use environments::{EnvChoice, Environment};
pub use error::{CliError, Result};
