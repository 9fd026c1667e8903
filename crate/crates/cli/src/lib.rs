//! Configuration-driven experiment harness for the `neurofl` controllers.

pub mod commands;
pub mod config;
mod error;
pub mod output;

pub use commands::{cmd_compare, cmd_simulate, resolve_out_dir, run_experiment, OUT_DIR_ENV};
pub use config::{load_config, parse_config, ExperimentConfig, Mode};
pub use error::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAULT: i32 = 3;
pub const EXIT_IO: i32 = 4;
