//! Replicated Monte Carlo experiments, file formats and the `rmtlab`
//! command line, built on `rmtlab-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod montecarlo;

pub use crate::config::{Command, Format, RunConfig};
pub use crate::error::{Error, Result};
pub use crate::montecarlo::ExperimentConfig;
