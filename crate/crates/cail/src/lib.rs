//! File formats, pipelines and the command line around `cail-core`.
//!
//! - [`dataset`]: JSON-lines dataset files.
//! - [`checkpoint`]: the binary checkpoint container.
//! - [`export`]: DOT and JSON template export.
//! - [`sweep`]: multi-threaded sensitivity sweeps written as CSV.
//! - [`cli`]: the `cail` binary.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod export;
pub mod json;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::RunConfig;
pub use error::Error;
