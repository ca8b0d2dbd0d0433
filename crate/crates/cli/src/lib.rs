//! Configuration, persistence and orchestration for the `covllg` command.

pub mod binfmt;
pub mod config;
pub mod run;
