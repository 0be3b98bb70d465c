//! Experiment driver for the `qsrm` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod tasks;
