//! Command-line front end: configuration, datasets, image files and the
//! streaming server.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod imageio;
pub mod job;
pub mod poses;
pub mod serve;

pub use config::Config;
pub use error::{CliError, Result};
