use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::math;

/// Parameter slots of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Wq,
    Bq,
    Wk,
    Wv,
    Bv,
    We,
    Be,
    W1,
    B1,
    W2,
    B2,
    NoNews,
}

impl Slot {
    pub const ALL: [Slot; 12] = [
        Slot::Wq,
        Slot::Bq,
        Slot::Wk,
        Slot::Wv,
        Slot::Bv,
        Slot::We,
        Slot::Be,
        Slot::W1,
        Slot::B1,
        Slot::W2,
        Slot::B2,
        Slot::NoNews,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Wq => "wq",
            Slot::Bq => "bq",
            Slot::Wk => "wk",
            Slot::Wv => "wv",
            Slot::Bv => "bv",
            Slot::We => "we",
            Slot::Be => "be",
            Slot::W1 => "w1",
            Slot::B1 => "b1",
            Slot::W2 => "w2",
            Slot::B2 => "b2",
            Slot::NoNews => "no_news",
        }
    }

    pub fn from_name(name: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }

    fn is_weight(self) -> bool {
        matches!(self, Slot::Wq | Slot::Wk | Slot::Wv | Slot::We | Slot::W1 | Slot::W2)
    }
}

/// Dense row-major matrix; vectors are `n x 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::validation(format!(
                "tensor {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `W x + b` where `self` is `W` and `bias` is a vector tensor.
    pub(crate) fn affine(&self, x: &[f64], bias: &Tensor) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .zip(&bias.data)
            .map(|(row, b)| b + math::dot(row, x))
            .collect()
    }

    /// `W x`.
    pub(crate) fn linear(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| math::dot(row, x))
            .collect()
    }

    /// `W^T y`.
    pub(crate) fn transpose_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, yi) in self.data.chunks_exact(self.cols.max(1)).zip(y) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * yi;
            }
        }
        out
    }

    /// `self += a b^T`.
    pub(crate) fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (row, ai) in self.data.chunks_exact_mut(self.cols.max(1)).zip(a) {
            for (w, bj) in row.iter_mut().zip(b) {
                *w += ai * bj;
            }
        }
    }

    pub(crate) fn add_vec(&mut self, a: &[f64]) {
        for (w, x) in self.data.iter_mut().zip(a) {
            *w += x;
        }
    }
}

/// One tensor per [`Slot`]; used both for parameters and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    tensors: [Tensor; 12],
}

impl ParamSet {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            tensors: core::array::from_fn(|i| {
                let (r, c) = config.shape(Slot::ALL[i]);
                Tensor::zeros(r, c)
            }),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Slot, &Tensor)> {
        Slot::ALL.into_iter().zip(self.tensors.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (Slot, &mut Tensor)> {
        Slot::ALL.into_iter().zip(self.tensors.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        for (slot, t) in self.iter() {
            let (r, c) = config.shape(slot);
            if (t.rows, t.cols) != (r, c) || t.data.len() != r * c {
                return Err(Error::validation(format!(
                    "tensor `{}` has shape {}x{}, config expects {r}x{c}",
                    slot.name(),
                    t.rows,
                    t.cols
                )));
            }
        }
        Ok(())
    }
}

impl Index<Slot> for ParamSet {
    type Output = Tensor;

    fn index(&self, slot: Slot) -> &Tensor {
        &self.tensors[slot.index()]
    }
}

impl IndexMut<Slot> for ParamSet {
    fn index_mut(&mut self, slot: Slot) -> &mut Tensor {
        &mut self.tensors[slot.index()]
    }
}

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Model configuration plus every parameter tensor.
///
/// Each mutable access stamps a fresh revision so that forward traces taken
/// before the mutation are rejected by the backward pass.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: ModelConfig,
    set: ParamSet,
    revision: u64,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.set == other.set
    }
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases and zero empty-day vector.
    ///
    /// Every slot draws from its own ChaCha stream so that a slot's values
    /// depend only on the seed and its own shape.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut set = ParamSet::zeros(config);
        for (slot, t) in set.iter_mut() {
            if !slot.is_weight() || t.is_empty() {
                continue;
            }
            let bound = math::sqrt(6.0 / (t.rows + t.cols) as f64);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(slot.index() as u64 + 1);
            for w in &mut t.data {
                *w = rng.random_range(-bound..=bound);
            }
        }
        if config.identity_values {
            let wv = &mut set[Slot::Wv];
            for i in 0..wv.rows {
                for j in 0..wv.cols {
                    wv.data[i * wv.cols + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        Ok(Self {
            config: *config,
            set,
            revision: fresh_revision(),
        })
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: *config,
            set: ParamSet::zeros(config),
            revision: fresh_revision(),
        })
    }

    pub fn from_parts(config: ModelConfig, set: ParamSet) -> Result<Self> {
        config.validate()?;
        set.check_shapes(&config)?;
        if !set.is_finite() {
            return Err(Error::validation("parameters must be finite"));
        }
        Ok(Self {
            config,
            set,
            revision: fresh_revision(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &ParamSet {
        &self.set
    }

    pub fn tensors_mut(&mut self) -> &mut ParamSet {
        self.revision = fresh_revision();
        &mut self.set
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn param_count(&self) -> usize {
        self.set.len()
    }

    pub(crate) fn get(&self, slot: Slot) -> &Tensor {
        &self.set[slot]
    }
}
