//! Trading metrics, backtests and news-weight distributions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;

use crate::dataset::AlignedDataset;
use crate::error::{Error, Result};
use crate::math;
use crate::model::{forward_window, ModelParams};
use crate::train::{sample_days, TrainedModel, WindowSplit};

/// Risk-free rate subtracted from the mean daily return, applied verbatim.
pub const DEFAULT_RISK_FREE: f64 = 0.02;

/// Percentiles reported by [`weight_report`].
pub const WEIGHT_PERCENTILES: [f64; 5] = [50.0, 80.0, 95.0, 98.0, 99.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnlMode {
    /// `flag = +1` when the call is right, else `-1`; contribution `flag * r`.
    AsWritten,
    /// Long on a predicted rise, short otherwise; contribution `position * r`.
    Directional,
}

impl PnlMode {
    pub fn name(self) -> &'static str {
        match self {
            PnlMode::AsWritten => "as-written",
            PnlMode::Directional => "directional",
        }
    }

    /// Signed multiplier applied to the day's return.
    pub fn flag(self, prediction: bool, label: bool) -> f64 {
        let hit = match self {
            PnlMode::AsWritten => prediction == label,
            PnlMode::Directional => prediction,
        };
        if hit {
            1.0
        } else {
            -1.0
        }
    }
}

impl core::fmt::Display for PnlMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for PnlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-written" => Ok(PnlMode::AsWritten),
            "directional" => Ok(PnlMode::Directional),
            _ => Err(Error::validation(format!(
                "unknown pnl mode `{s}` (expected as-written or directional)"
            ))),
        }
    }
}

/// Fraction of positions where `preds` and `labels` agree.
pub fn accuracy(preds: &[bool], labels: &[bool]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptySeries("accuracy needs at least one prediction"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// `(c[d+1] - c[d]) / c[d]` for every consecutive pair.
pub fn daily_returns(closes: &[f64]) -> Result<Vec<f64>> {
    if let Some(c) = closes.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::validation(format!("close {c} is not a positive price")));
    }
    Ok(closes.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect())
}

/// Per-day `flag * r` under `mode`; `closes` has one more entry than `preds`.
pub fn flagged_returns(preds: &[bool], closes: &[f64], mode: PnlMode) -> Result<Vec<f64>> {
    if closes.len() != preds.len() + 1 {
        return Err(Error::validation(format!(
            "{} closes for {} predictions (need one more close)",
            closes.len(),
            preds.len()
        )));
    }
    let returns = daily_returns(closes)?;
    Ok(preds
        .iter()
        .zip(closes.windows(2))
        .zip(returns)
        .map(|((&p, w), r)| mode.flag(p, w[1] > w[0]) * r)
        .collect())
}

pub fn pnl(preds: &[bool], closes: &[f64], mode: PnlMode) -> Result<f64> {
    Ok(flagged_returns(preds, closes, mode)?.iter().sum())
}

/// `(mean - r_f) / sample_std` of an already flagged return series.
pub fn sharpe_of(returns: &[f64], risk_free: f64) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: returns.len(),
        });
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let std = math::sqrt(var);
    if !(std > 0.0) {
        return Err(Error::UndefinedSharpe);
    }
    Ok((mean - risk_free) / std)
}

pub fn sharpe(preds: &[bool], closes: &[f64], risk_free: f64, mode: PnlMode) -> Result<f64> {
    sharpe_of(&flagged_returns(preds, closes, mode)?, risk_free)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestDay {
    pub date: NaiveDate,
    pub prediction: bool,
    pub label: bool,
    pub flag: f64,
    /// Realized next-day close return.
    pub ret: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub window_index: usize,
    pub mode: PnlMode,
    pub risk_free: f64,
    pub days: Vec<BacktestDay>,
    pub accuracy: f64,
    pub pnl: f64,
    /// `None` when the flagged returns have zero spread.
    pub sharpe: Option<f64>,
    pub mean_loss: f64,
}

/// Cross-window arithmetic means.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanReport {
    pub windows: usize,
    pub accuracy: f64,
    pub pnl: f64,
    /// Mean over windows with a defined Sharpe ratio.
    pub sharpe: Option<f64>,
    pub undefined_sharpe_windows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backtest {
    pub windows: Vec<BacktestReport>,
    pub mean: MeanReport,
}

/// Scores `params` on the given record indices of an already standardized
/// dataset. Every index needs a label and a full lookback window.
pub fn evaluate_days(
    params: &ModelParams,
    dataset: &AlignedDataset,
    days: &[usize],
    window_index: usize,
    mode: PnlMode,
    risk_free: f64,
) -> Result<BacktestReport> {
    if days.is_empty() {
        return Err(Error::EmptySeries("no days to evaluate"));
    }
    let t = params.config().lookback;
    let mut out = Vec::with_capacity(days.len());
    let mut loss = 0.0;
    for &i in days {
        let record = dataset.records().get(i).ok_or(Error::OutOfBounds {
            start: i,
            end: i + 1,
            len: dataset.len(),
        })?;
        let label = record
            .label
            .ok_or_else(|| Error::validation(format!("{} has no label", record.date)))?;
        let window = dataset.window(i, t).ok_or_else(|| {
            Error::validation(format!("{} lacks {t} days of history", record.date))
        })?;
        let trace = forward_window(params, window, Some(label))?;
        loss += trace.loss.unwrap_or_default();
        let prediction = trace.predicts_increase();
        let (c0, c1) = (dataset.close(i), dataset.close(i + 1));
        let ret = (c1 - c0) / c0;
        let flag = mode.flag(prediction, label);
        out.push(BacktestDay {
            date: record.date,
            prediction,
            label,
            flag,
            ret,
            contribution: flag * ret,
        });
    }
    let preds: Vec<bool> = out.iter().map(|d| d.prediction).collect();
    let labels: Vec<bool> = out.iter().map(|d| d.label).collect();
    let contributions: Vec<f64> = out.iter().map(|d| d.contribution).collect();
    let sharpe = match sharpe_of(&contributions, risk_free) {
        Ok(s) => Some(s),
        Err(Error::UndefinedSharpe | Error::InsufficientData { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(BacktestReport {
        window_index,
        mode,
        risk_free,
        accuracy: accuracy(&preds, &labels)?,
        pnl: contributions.iter().sum(),
        sharpe,
        mean_loss: loss / days.len() as f64,
        days: out,
    })
}

/// Arithmetic means of the per-window metrics.
pub fn mean_report(windows: &[BacktestReport]) -> Result<MeanReport> {
    if windows.is_empty() {
        return Err(Error::EmptySeries("no windows to average"));
    }
    let n = windows.len() as f64;
    let sharpes: Vec<f64> = windows.iter().filter_map(|w| w.sharpe).collect();
    Ok(MeanReport {
        windows: windows.len(),
        accuracy: windows.iter().map(|w| w.accuracy).sum::<f64>() / n,
        pnl: windows.iter().map(|w| w.pnl).sum::<f64>() / n,
        sharpe: (!sharpes.is_empty()).then(|| sharpes.iter().sum::<f64>() / sharpes.len() as f64),
        undefined_sharpe_windows: windows.len() - sharpes.len(),
    })
}

/// Test-range backtest of one trained model per split.
///
/// `dataset` holds raw records; each model's own feature statistics are
/// applied before scoring.
pub fn backtest(
    models: &[TrainedModel],
    dataset: &AlignedDataset,
    splits: &[WindowSplit],
    mode: PnlMode,
    risk_free: f64,
) -> Result<Backtest> {
    let windows = splits
        .iter()
        .map(|split| {
            let model = models
                .iter()
                .find(|m| m.split.window_index == split.window_index)
                .ok_or_else(|| {
                    Error::validation(format!("no trained model for window {}", split.window_index))
                })?;
            backtest_window(model, dataset, mode, risk_free)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = mean_report(&windows)?;
    Ok(Backtest { windows, mean })
}

/// Test-range report of a single trained model.
pub fn backtest_window(
    model: &TrainedModel,
    dataset: &AlignedDataset,
    mode: PnlMode,
    risk_free: f64,
) -> Result<BacktestReport> {
    let data = dataset.restandardize(&model.stats)?;
    let split = &model.split;
    let days = sample_days(&data, &split.test, split.train.start, model.params.config().lookback, true);
    evaluate_days(&model.params, &data, &days, split.window_index, mode, risk_free)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewsWeight {
    pub date: NaiveDate,
    pub id: String,
    pub raw: f64,
    /// Min-max rescaled within the day.
    pub normalized: f64,
    /// 1 for the day's largest weight.
    pub rank: usize,
    pub day_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub weights: Vec<NewsWeight>,
    /// `(percentile, value)` pairs over the pooled normalized weights.
    pub percentiles: Vec<(f64, f64)>,
    pub fraction_above_098: f64,
    pub fraction_below_05: f64,
    pub days_used: usize,
    /// Multi-news days whose weights were all identical.
    pub degenerate_days: usize,
    /// Days with fewer than two items.
    pub skipped_days: usize,
}

impl WeightReport {
    /// Mean normalized weight and mean rank of the items matching `select`.
    pub fn summary_of(&self, select: impl Fn(&NewsWeight) -> bool) -> Option<(f64, f64, usize)> {
        let (mut w, mut r, mut n) = (0.0, 0.0, 0usize);
        for item in self.weights.iter().filter(|x| select(x)) {
            w += item.normalized;
            r += item.rank as f64;
            n += 1;
        }
        (n > 0).then(|| (w / n as f64, r / n as f64, n))
    }
}

/// Rescales to `[0, 1]` by min-max; `None` when all values are equal.
pub fn min_max_normalize(values: &[f64]) -> Option<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    Some(values.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect())
}

/// Pooled min-max normalized attention weights over every record of
/// `dataset` (already standardized for `params`).
pub fn weight_report(params: &ModelParams, dataset: &AlignedDataset) -> Result<WeightReport> {
    weight_report_range(params, dataset, 0..dataset.len())
}

pub fn weight_report_range(
    params: &ModelParams,
    dataset: &AlignedDataset,
    days: Range<usize>,
) -> Result<WeightReport> {
    if !params.config().uses_attention() {
        return Err(Error::validation("weight report needs an attention model"));
    }
    let t = params.config().lookback;
    let mut weights = Vec::new();
    let (mut used, mut degenerate, mut skipped) = (0, 0, 0);
    for i in days {
        let Some(window) = dataset.window(i, t) else {
            skipped += 1;
            continue;
        };
        let record = &dataset.records()[i];
        if record.news.len() < 2 {
            skipped += 1;
            continue;
        }
        let trace = forward_window(params, window, None)?;
        let day = trace.days.last().expect("non-empty window");
        let w = &day.attention.weights;
        let Some(normalized) = min_max_normalize(w) else {
            degenerate += 1;
            continue;
        };
        used += 1;
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        let mut rank = alloc::vec![0; w.len()];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r + 1;
        }
        for (j, item) in record.news.items.iter().enumerate() {
            weights.push(NewsWeight {
                date: record.date,
                id: item.id.clone(),
                raw: w[j],
                normalized: normalized[j],
                rank: rank[j],
                day_size: w.len(),
            });
        }
    }
    if weights.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut pooled: Vec<f64> = weights.iter().map(|w| w.normalized).collect();
    pooled.sort_by(f64::total_cmp);
    let n = pooled.len() as f64;
    Ok(WeightReport {
        percentiles: WEIGHT_PERCENTILES
            .iter()
            .map(|&p| (p, math::quantile_sorted(&pooled, p / 100.0)))
            .collect(),
        fraction_above_098: pooled.iter().filter(|&&x| x > 0.98).count() as f64 / n,
        fraction_below_05: pooled.iter().filter(|&&x| x < 0.5).count() as f64 / n,
        weights,
        days_used: used,
        degenerate_days: degenerate,
        skipped_days: skipped,
    })
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CLOSES: [f64; 4] = [100.0, 101.0, 100.0, 102.0];

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[true, false], &[true, false]).unwrap(), 1.0);
        assert_eq!(accuracy(&[false, true], &[true, false]).unwrap(), 0.0);
        let a = accuracy(&[true, false, true], &[true, false, false]).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(accuracy(&[true], &[]), Err(Error::Validation(_))));
    }

    #[test]
    fn pnl_fixture() {
        let preds = [true, false, true];
        let written = pnl(&preds, &CLOSES, PnlMode::AsWritten).unwrap();
        let directional = pnl(&preds, &CLOSES, PnlMode::Directional).unwrap();
        // 0.01 - 1/101 + 0.02 and 0.01 + 1/101 + 0.02
        assert!((written - 0.0200990).abs() < 1e-6);
        assert!((directional - 0.0399010).abs() < 1e-6);
        assert!((written - (0.03 - 1.0 / 101.0)).abs() < 1e-15);
        let wrong = pnl(&[false, true, false], &CLOSES, PnlMode::AsWritten).unwrap();
        assert_eq!(wrong, -written);
    }

    #[test]
    fn pnl_rejects_bad_closes() {
        assert!(pnl(&[true], &[100.0, 0.0], PnlMode::AsWritten).is_err());
        assert!(pnl(&[true, true], &[100.0, 101.0], PnlMode::AsWritten).is_err());
    }

    #[test]
    fn sharpe_fixture() {
        let s = sharpe_of(&[0.02, 0.00], 0.0).unwrap();
        assert!((s - 0.70711).abs() < 1e-5);
        assert!((s - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(sharpe_of(&[0.01, 0.01, 0.01], 0.0), Err(Error::UndefinedSharpe));
        assert_eq!(sharpe_of(&[0.02, 0.00], 0.01).unwrap(), 0.0);
        // the closes fixture in as-written mode with a constant series of flags
        let s = sharpe(&[true, false, true], &CLOSES, DEFAULT_RISK_FREE, PnlMode::Directional);
        assert!(s.unwrap().is_finite());
    }

    #[test]
    fn concentrated_day_normalizes_to_one_hot() {
        let w = crate::aggregate::aggregation_weights(&[10.0, 0.0, 0.0], 16.0).unwrap();
        assert_eq!(min_max_normalize(&w).unwrap(), [1.0, 0.0, 0.0]);
        let flat = crate::aggregate::aggregation_weights(&[0.3, 0.3], 4.0).unwrap();
        assert_eq!(min_max_normalize(&flat), None);
    }

    #[test]
    fn mean_of_identical_windows() {
        let w = BacktestReport {
            window_index: 0,
            mode: PnlMode::AsWritten,
            risk_free: 0.0,
            days: Vec::new(),
            accuracy: 0.7,
            pnl: 0.03,
            sharpe: Some(0.4),
            mean_loss: 0.6,
        };
        let m = mean_report(&[w.clone(), w.clone(), w]).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-15);
        assert!((m.pnl - 0.03).abs() < 1e-15);
        assert!((m.sharpe.unwrap() - 0.4).abs() < 1e-15);
    }

    fn closes_strategy() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(50.0f64..150.0, n + 1),
            )
        })
    }

    proptest! {
        #[test]
        fn as_written_flips_under_complement((preds, closes) in closes_strategy()) {
            let flipped: Vec<bool> = preds.iter().map(|p| !p).collect();
            let a = pnl(&preds, &closes, PnlMode::AsWritten).unwrap();
            let b = pnl(&flipped, &closes, PnlMode::AsWritten).unwrap();
            prop_assert_eq!(a, -b);
            let a = pnl(&preds, &closes, PnlMode::Directional).unwrap();
            let b = pnl(&flipped, &closes, PnlMode::Directional).unwrap();
            prop_assert_eq!(a, -b);
        }

        #[test]
        fn sharpe_scale_free_without_risk_free(
            returns in proptest::collection::vec(-0.05f64..0.05, 2..30),
            scale in 0.01f64..100.0,
        ) {
            if let Ok(s) = sharpe_of(&returns, 0.0) {
                let scaled: Vec<f64> = returns.iter().map(|r| r * scale).collect();
                let t = sharpe_of(&scaled, 0.0).unwrap();
                prop_assert!((s - t).abs() < 1e-9 * (1.0 + s.abs()));
            }
        }

        #[test]
        fn min_max_bounds(values in proptest::collection::vec(-5.0f64..5.0, 2..30)) {
            if let Some(n) = min_max_normalize(&values) {
                prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
                prop_assert!(n.contains(&1.0) && n.contains(&0.0));
            }
        }

        #[test]
        fn accuracy_in_unit_interval((preds, closes) in closes_strategy()) {
            let labels: Vec<bool> = closes.windows(2).map(|w| w[1] > w[0]).collect();
            let a = accuracy(&preds, &labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
