//! Library half of the `hyseek` binary, exposed for tests.

pub mod arc_csv;
pub mod commands;
pub mod config;
