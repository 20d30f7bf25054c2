//! Command-line front end: evaluation reports, split files, leaderboard
//! tables, self-checks and manufactured datasets.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;
pub mod table;
pub mod verify;

pub use commands::run;
pub use error::{exit, CliError};
