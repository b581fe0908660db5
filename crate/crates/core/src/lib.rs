//! Imitation learning with a bank of learnable DAG templates.
//!
//! The crate is `no_std` + `alloc`: every routine here is a pure function of
//! its inputs and a seeded RNG. File formats, the command line and threading
//! live in the companion `cail` crate.

#![no_std]

extern crate alloc;

pub mod cluster;
pub mod diff;
pub mod encoding;
pub mod graph;
pub mod kuramoto;
pub mod math;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod policy;
pub mod templates;
pub mod training;
