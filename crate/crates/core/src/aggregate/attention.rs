use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Difference-enlargement factor applied inside the softmax.
///
/// Production values satisfy `epsilon >= 1`. The only way to obtain `0` is
/// [`Epsilon::averaging`], which collapses the attention to a plain mean and
/// exists for equivalence checks against the averaging baseline.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 1.0 {
            return Err(Error::validation(format!(
                "epsilon must be finite and >= 1, got {value}"
            )));
        }
        Ok(Self(value))
    }

    /// `epsilon = 0`: uniform weights regardless of scores.
    pub const fn averaging() -> Self {
        Self(0.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Self(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionConfig {
    pub d_k: usize,
    pub d_v: usize,
    pub epsilon: Epsilon,
}

impl AttentionConfig {
    pub fn new(d_k: usize, d_v: usize, epsilon: Epsilon) -> Result<Self> {
        if d_k == 0 || d_v == 0 {
            return Err(Error::validation("attention dimensions must be >= 1"));
        }
        Ok(Self { d_k, d_v, epsilon })
    }
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            d_k: 4,
            d_v: 8,
            epsilon: Epsilon::default(),
        }
    }
}

/// Scores, weights and the aggregated attention features of one day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionOutput {
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub attf: Vec<f64>,
}

/// Scaled dot products `query . key_i / sqrt(d_k)`.
pub fn attention_scores<K: AsRef<[f64]>>(query: &[f64], keys: &[K]) -> Result<Vec<f64>> {
    if keys.is_empty() {
        return Err(Error::EmptyDay);
    }
    let d_k = query.len();
    if d_k == 0 {
        return Err(Error::validation("query must have at least one entry"));
    }
    let scale = 1.0 / math::sqrt(d_k as f64);
    keys.iter()
        .map(|key| {
            let key = key.as_ref();
            if key.len() != d_k {
                return Err(Error::validation(format!(
                    "key dimension {} does not match query dimension {d_k}",
                    key.len()
                )));
            }
            Ok(math::dot(query, key) * scale)
        })
        .collect()
}

/// `softmax(epsilon * scores)`, stabilized by subtracting the maximum score.
pub fn aggregation_weights(scores: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyDay);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::validation("attention scores must be finite"));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::validation(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = scores
        .iter()
        .map(|s| math::exp(epsilon * (s - max)))
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Weighted sum of value vectors.
pub fn attention_features<V: AsRef<[f64]>>(weights: &[f64], values: &[V]) -> Result<Vec<f64>> {
    if weights.len() != values.len() {
        return Err(Error::validation(format!(
            "{} weights for {} values",
            weights.len(),
            values.len()
        )));
    }
    let Some(first) = values.first() else {
        return Err(Error::EmptyDay);
    };
    let d_v = first.as_ref().len();
    let mut out = vec![0.0; d_v];
    for (w, value) in weights.iter().zip(values) {
        let value = value.as_ref();
        if value.len() != d_v {
            return Err(Error::validation("value vectors differ in dimension"));
        }
        for (o, v) in out.iter_mut().zip(value) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Scores, weights and attention features in one pass.
pub fn attend<K: AsRef<[f64]>, V: AsRef<[f64]>>(
    query: &[f64],
    keys: &[K],
    values: &[V],
    epsilon: f64,
) -> Result<AttentionOutput> {
    let scores = attention_scores(query, keys)?;
    let weights = aggregation_weights(&scores, epsilon)?;
    let attf = attention_features(&weights, values)?;
    Ok(AttentionOutput {
        scores,
        weights,
        attf,
    })
}
