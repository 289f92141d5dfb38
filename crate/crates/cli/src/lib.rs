//! Library surface of the command-line tool; the binary in `main.rs` is a
//! thin wrapper so integration tests and the acceptance suite can drive the
//! same code paths in-process.

pub mod app;
pub mod bench;
pub mod config;
pub mod output;
