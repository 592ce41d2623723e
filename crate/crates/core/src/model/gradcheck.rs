use super::backward::{batch_gradients, Gradients};
use super::forward::{forward_window, DayInput};
use super::{ModelParams, Slot};
use crate::error::Result;
use crate::math;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
    pub max_rel_error: f64,
    pub worst_slot: Option<Slot>,
    pub worst_index: usize,
    pub entries_checked: usize,
    pub all_finite: bool,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.all_finite && self.max_rel_error < tolerance
    }
}

fn batch_loss<D: DayInput>(params: &ModelParams, batch: &[(&[D], bool)]) -> Result<f64> {
    let mut total = 0.0;
    for (days, label) in batch {
        total += forward_window(params, days, Some(*label))?
            .loss
            .unwrap_or_default();
    }
    Ok(total / batch.len() as f64)
}

/// Checks [`batch_gradients`] against central differences with step `h`.
pub fn grad_check<D: DayInput>(
    params: &ModelParams,
    batch: &[(&[D], bool)],
    h: f64,
) -> Result<GradCheckReport> {
    grad_check_with(params, batch, h, |p, b| batch_gradients(p, b).map(|(_, g)| g))
}

/// Checks an arbitrary gradient routine against central differences.
pub fn grad_check_with<D, F>(
    params: &ModelParams,
    batch: &[(&[D], bool)],
    h: f64,
    analytic: F,
) -> Result<GradCheckReport>
where
    D: DayInput,
    F: Fn(&ModelParams, &[(&[D], bool)]) -> Result<Gradients>,
{
    let grads = analytic(params, batch)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_slot: None,
        worst_index: 0,
        entries_checked: 0,
        all_finite: true,
    };
    for slot in Slot::ALL {
        for idx in 0..params.tensors()[slot].len() {
            let original = params.tensors()[slot].data[idx];
            probe.tensors_mut()[slot].data[idx] = original + h;
            let up = batch_loss(&probe, batch)?;
            probe.tensors_mut()[slot].data[idx] = original - h;
            let down = batch_loss(&probe, batch)?;
            probe.tensors_mut()[slot].data[idx] = original;

            let numeric = (up - down) / (2.0 * h);
            let exact = grads.0[slot].data[idx];
            if !numeric.is_finite() || !exact.is_finite() {
                report.all_finite = false;
            }
            let denom = (math::abs(exact) + math::abs(numeric)).max(1e-8);
            let rel = math::abs(exact - numeric) / denom;
            report.entries_checked += 1;
            if rel > report.max_rel_error || report.worst_slot.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst_slot = Some(slot);
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}
