//! File formats, parallel drivers and the command-line front end for
//! `farchan-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod settings;
pub mod sweep;

pub use error::{exit, CliError};
