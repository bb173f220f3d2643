//! Command-line pipeline: render, optimize, eval, gen-candidates,
//! train-ranker.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_eval, cmd_gen_candidates, cmd_optimize, cmd_render, cmd_train_ranker, write_eval_csv, with_threads,
};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
