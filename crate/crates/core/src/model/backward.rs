use alloc::vec;
use alloc::vec::Vec;

use super::forward::{forward_window, probabilities, DayInput, ForwardTrace};
use super::{HeadKind, ModelParams, ParamSet, Slot};
use crate::error::{Error, Result};
use crate::math;

/// Loss gradients, one tensor per parameter slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub ParamSet);

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients(ParamSet::zeros(params.config()))
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.0.iter_mut() {
            for g in &mut t.data {
                *g *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for ((_, a), (_, b)) in self.0.iter_mut().zip(other.0.iter()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    /// Euclidean norm over every slot except `skip`.
    pub fn norm_excluding(&self, skip: impl Fn(Slot) -> bool) -> f64 {
        let ss: f64 = self
            .0
            .iter()
            .filter(|(slot, _)| !skip(*slot))
            .flat_map(|(_, t)| t.data.iter())
            .map(|g| g * g)
            .sum();
        math::sqrt(ss)
    }
}

/// Loss gradients with respect to the model's inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradients {
    /// Per window day, per news item.
    pub sentiments: Vec<Vec<[f64; 3]>>,
    pub prices: Vec<[f64; 6]>,
}

/// Exact reverse-mode gradients of the trace's loss.
pub fn backward(trace: &ForwardTrace, params: &ModelParams) -> Result<Gradients> {
    backward_impl(trace, params, false).map(|(g, _)| g)
}

/// Like [`backward`], also returning gradients for every news sentiment and
/// price feature.
pub fn backward_with_inputs(
    trace: &ForwardTrace,
    params: &ModelParams,
) -> Result<(Gradients, InputGradients)> {
    backward_impl(trace, params, true).map(|(g, i)| (g, i.expect("requested")))
}

fn backward_impl(
    trace: &ForwardTrace,
    params: &ModelParams,
    want_inputs: bool,
) -> Result<(Gradients, Option<InputGradients>)> {
    if trace.revision != params.revision() {
        return Err(Error::StaleTrace);
    }
    let Some(label) = trace.label else {
        return Err(Error::validation("backward needs a labeled trace"));
    };
    let cfg = params.config();
    let mut grads = Gradients::zeros_like(params);
    let g = &mut grads.0;

    let p = probabilities(trace.logits);
    let target = usize::from(label);
    let dz: Vec<f64> = (0..2)
        .map(|i| p[i] - if i == target { 1.0 } else { 0.0 })
        .collect();

    g[Slot::B2].add_vec(&dz);
    let dx = match cfg.head {
        HeadKind::Mlp => {
            g[Slot::W2].add_outer(&dz, &trace.hidden);
            let dh = params.get(Slot::W2).transpose_mul(&dz);
            let du: Vec<f64> = dh
                .iter()
                .zip(&trace.pre_hidden)
                .map(|(d, &z)| d * math::sigmoid(z))
                .collect();
            g[Slot::W1].add_outer(&du, &trace.input);
            g[Slot::B1].add_vec(&du);
            params.get(Slot::W1).transpose_mul(&du)
        }
        HeadKind::Shallow => {
            g[Slot::W2].add_outer(&dz, &trace.input);
            params.get(Slot::W2).transpose_mul(&dz)
        }
    };

    let d_e = cfg.d_e;
    let day_dim = cfg.day_dim();
    let eps = cfg.epsilon.get();
    let inv_sqrt_dk = 1.0 / math::sqrt(cfg.d_k as f64);
    let mut inputs = want_inputs.then(|| InputGradients {
        sentiments: Vec::with_capacity(trace.days.len()),
        prices: Vec::with_capacity(trace.days.len()),
    });

    for (day, dm) in trace.days.iter().zip(dx.chunks_exact(day_dim)) {
        let (de, drep) = dm.split_at(d_e);
        g[Slot::We].add_outer(de, &day.price);
        g[Slot::Be].add_vec(de);
        let mut dprice = params.get(Slot::We).transpose_mul(de);
        let mut dsent: Vec<[f64; 3]> = vec![[0.0; 3]; day.sentiments.len()];

        if day.used_fallback {
            g[Slot::NoNews].add_vec(drep);
        } else if cfg.uses_attention() {
            let w = &day.attention.weights;
            // value path: d v_i = w_i dAttF
            // weight path: d w_i = dAttF . v_i, then through the scaled softmax
            let dw: Vec<f64> = day.values.iter().map(|v| math::dot(drep, v)).collect();
            let mean_dw: f64 = w.iter().zip(&dw).map(|(wi, d)| wi * d).sum();
            let mut dq = vec![0.0; cfg.d_k];
            for (i, s) in day.sentiments.iter().enumerate() {
                let dv: Vec<f64> = drep.iter().map(|d| w[i] * d).collect();
                g[Slot::Wv].add_outer(&dv, s);
                g[Slot::Bv].add_vec(&dv);

                let da = eps * w[i] * (dw[i] - mean_dw);
                for (q, k) in dq.iter_mut().zip(&day.keys[i]) {
                    *q += da * k * inv_sqrt_dk;
                }
                let dk: Vec<f64> = day.query.iter().map(|q| da * q * inv_sqrt_dk).collect();
                g[Slot::Wk].add_outer(&dk, s);

                if want_inputs {
                    let from_v = params.get(Slot::Wv).transpose_mul(&dv);
                    let from_k = params.get(Slot::Wk).transpose_mul(&dk);
                    for c in 0..3 {
                        dsent[i][c] = from_v[c] + from_k[c];
                    }
                }
            }
            g[Slot::Wq].add_outer(&dq, &day.price);
            g[Slot::Bq].add_vec(&dq);
            if want_inputs {
                for (a, b) in dprice.iter_mut().zip(params.get(Slot::Wq).transpose_mul(&dq)) {
                    *a += b;
                }
            }
        }

        if let Some(acc) = inputs.as_mut() {
            let mut price = [0.0; 6];
            price.copy_from_slice(&dprice);
            acc.prices.push(price);
            acc.sentiments.push(dsent);
        }
    }
    Ok((grads, inputs))
}

/// Mean loss and mean gradients over a batch of labeled windows.
pub fn batch_gradients<D: DayInput>(
    params: &ModelParams,
    batch: &[(&[D], bool)],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptySeries("batch has no windows"));
    }
    let mut total = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for (days, label) in batch {
        let trace = forward_window(params, days, Some(*label))?;
        loss += trace.loss.unwrap_or_default();
        total.add(&backward(&trace, params)?);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((loss / n, total))
}
