//! Command line and HTTP front ends for the `morphdes` library.

pub mod api;
pub mod cli;
pub mod service;

pub use cli::{run_cli, CommandOutcome};
