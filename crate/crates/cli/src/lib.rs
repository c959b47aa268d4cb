//! Config-driven experiment driver for `viewsym`.
//!
//! Every run writes to `<out>/runs/<config-hash>/{stimuli,bases,results,report}`.

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

pub use config::{Experiment, RunConfig};
pub use error::CliError;
