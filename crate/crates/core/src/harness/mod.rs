//! Experiment recipes, sweep runners and the `decenteq` command line.

pub mod cli;
pub mod config;
pub mod runner;
pub mod table;

pub use cli::cli_main;
pub use config::{Axis, ExperimentSpec, Mode, Series};
pub use runner::run;
pub use table::{Cell, ResultTable};
