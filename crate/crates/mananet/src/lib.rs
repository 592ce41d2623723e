//! File formats and command-line driver for [`mananet_core`].
//!
//! - [`io`]: price CSV, news JSONL and planted ground truth.
//! - [`checkpoint`]: bit-exact text checkpoints.
//! - [`config`]: strict flat `key = value` run and generator configs.
//! - [`report`]: CSV, JSON and SVG artifacts.
//! - [`commands`]: the `mananet` subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod io;
pub mod report;

pub use mananet_core as core;
