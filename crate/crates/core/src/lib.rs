#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(docsrs, feature(doc_cfg))]

//! Market-news attention aggregation with end-to-end trainable market
//! prediction.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! - [`dataset`]: price bars, sentiment triples, labels, leakage-free price
//!   features and the day-aligned dataset.
//! - [`aggregate`]: scaled dot-product market-news attention with a
//!   difference-enlargement softmax, the equal-weight baseline aggregators
//!   and the homogenization statistics.
//! - [`model`]: affine encoders, shallow/MLP heads, cross-entropy loss,
//!   exact reverse-mode gradients and a finite-difference checker.
//! - [`train`]: sliding-window cross-validation, momentum gradient descent
//!   and grid search over the enlargement factor and lookback.
//! - [`eval`]: accuracy, PnL, Sharpe ratio, backtests and news-weight
//!   distribution reports.
//! - [`synth`]: deterministic synthetic corpora.
//!
//! File formats and the command-line driver live in the `mananet` crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aggregate;
pub mod dataset;
pub mod error;
pub mod eval;
pub(crate) mod math;
pub mod model;
pub mod synth;
pub mod train;

pub use chrono::NaiveDate;
pub use error::{Error, Result};
