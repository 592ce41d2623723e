//! Trainable market-news attention model.
//!
//! Per trading day `d` the price features feed an encoder `e(p_d)` and a
//! query `q(p_d)`; every news triple feeds a key `k(s)` and a value `v(s)`.
//! The attention features are concatenated with `e(p_d)` into `m_d`, the
//! `t` most recent `m_d` are concatenated in chronological order and a
//! shallow or one-hidden-layer head emits two logits (index 1 = "increase").
//! The query, value and price encoders are affine maps. The key encoder is
//! linear: a key bias would shift every score of a day by the same amount,
//! which the softmax cancels, so it could never receive a gradient.

mod backward;
mod forward;
mod gradcheck;
mod params;

use alloc::format;

pub use backward::{backward, backward_with_inputs, batch_gradients, Gradients, InputGradients};
pub use forward::{forward_day, forward_window, loss, probabilities, DayInput, DayTrace, ForwardTrace};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, DEFAULT_STEP};
pub use params::{ModelParams, ParamSet, Slot, Tensor};

use crate::aggregate::{Epsilon, StaticAggregator};
use crate::dataset::PRICE_FEATURES;
use crate::error::{Error, Result};

/// Lookback lengths searched by default.
pub const DEFAULT_LOOKBACKS: [usize; 5] = [1, 3, 5, 10, 20];

/// Dimension of a sentiment triple.
pub const SENTIMENT_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// Affine map straight to the two logits.
    Shallow,
    /// One softplus hidden layer.
    Mlp,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Shallow => "shallow",
            HeadKind::Mlp => "mlp",
        }
    }
}

impl core::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shallow" | "sn" => Ok(HeadKind::Shallow),
            "mlp" => Ok(HeadKind::Mlp),
            _ => Err(Error::validation(format!("unknown head kind `{s}`"))),
        }
    }
}

/// How a day's news set becomes a fixed-size vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewsEncoder {
    /// Trainable market-news attention.
    Attention,
    /// A static baseline representation; only the price encoder and head train.
    Static(StaticAggregator),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub d_k: usize,
    pub d_v: usize,
    pub d_e: usize,
    pub hidden_width: usize,
    pub lookback: usize,
    pub epsilon: Epsilon,
    pub seed: u64,
    pub head: HeadKind,
    pub news: NewsEncoder,
    /// Pins the value map to the identity on triples (`d_v` must be 3) and
    /// excludes it from training.
    pub identity_values: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_k: 4,
            d_v: 8,
            d_e: 8,
            hidden_width: 64,
            lookback: 1,
            epsilon: Epsilon::default(),
            seed: 0,
            head: HeadKind::Mlp,
            news: NewsEncoder::Attention,
            identity_values: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_k == 0 || self.d_v == 0 || self.d_e == 0 || self.hidden_width == 0 {
            return Err(Error::validation("model dimensions must be >= 1"));
        }
        if self.lookback == 0 {
            return Err(Error::validation("lookback must be >= 1"));
        }
        if self.identity_values && self.d_v != SENTIMENT_DIM {
            return Err(Error::validation("identity value map needs d_v = 3"));
        }
        Ok(())
    }

    pub fn uses_attention(&self) -> bool {
        matches!(self.news, NewsEncoder::Attention)
    }

    /// Width of the per-day news representation.
    pub fn news_dim(&self) -> usize {
        match self.news {
            NewsEncoder::Attention => self.d_v,
            NewsEncoder::Static(agg) => agg.dim(),
        }
    }

    /// Width of `m_d`.
    pub fn day_dim(&self) -> usize {
        self.d_e + self.news_dim()
    }

    /// Width of the head input.
    pub fn head_input(&self) -> usize {
        self.lookback * self.day_dim()
    }

    /// Shape `(rows, cols)` of every parameter slot; unused slots are `(0, 0)`.
    pub fn shape(&self, slot: Slot) -> (usize, usize) {
        let att = self.uses_attention();
        let mlp = self.head == HeadKind::Mlp;
        let pick = |on: bool, shape: (usize, usize)| if on { shape } else { (0, 0) };
        match slot {
            Slot::Wq => pick(att, (self.d_k, PRICE_FEATURES)),
            Slot::Bq => pick(att, (self.d_k, 1)),
            Slot::Wk => pick(att, (self.d_k, SENTIMENT_DIM)),
            Slot::Wv => pick(att, (self.d_v, SENTIMENT_DIM)),
            Slot::Bv => pick(att, (self.d_v, 1)),
            Slot::We => (self.d_e, PRICE_FEATURES),
            Slot::Be => (self.d_e, 1),
            Slot::W1 => pick(mlp, (self.hidden_width, self.head_input())),
            Slot::B1 => pick(mlp, (self.hidden_width, 1)),
            Slot::W2 => {
                if mlp {
                    (2, self.hidden_width)
                } else {
                    (2, self.head_input())
                }
            }
            Slot::B2 => (2, 1),
            Slot::NoNews => (self.news_dim(), 1),
        }
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        Slot::ALL
            .iter()
            .map(|s| {
                let (r, c) = self.shape(*s);
                r * c
            })
            .sum()
    }

    /// Slots excluded from optimization.
    pub fn is_frozen(&self, slot: Slot) -> bool {
        self.identity_values && matches!(slot, Slot::Wv | Slot::Bv)
    }
}
