//! Configuration loading and experiment orchestration for the `adkyle` binary.

pub mod config;
pub mod run;

pub use config::{load_config, RunConfig};
pub use run::{run, Task};
