//! Files, command line, simulator and HTTP service around `birdspot-core`.

pub mod checklist_file;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod events;
pub mod formats;
pub mod server;
pub mod simulate;

pub use engine::Engine;
pub use error::{Error, ErrorKind, Result};
