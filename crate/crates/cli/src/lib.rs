//! Command-line front end: evaluation runs, a file-backed chain and the
//! global-progress report.

pub mod chain;
pub mod cli;
pub mod index;

pub use cli::{run, Cli, MintReady};
