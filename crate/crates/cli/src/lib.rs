//! Command-line front end for the forcegrip pipeline.

pub mod cli;
pub mod config;
pub mod output;
pub mod pipeline;

pub use cli::{exit_code, run};
pub use config::{Overrides, RunConfig};
