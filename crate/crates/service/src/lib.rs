//! Command-line workflows and the HTTP service around `valrec-core`.

pub mod commands;
pub mod config;
pub mod engine;
pub mod server;
pub mod wire;
