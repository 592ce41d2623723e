//! Sliding-window cross-validation, the training loop and grid search.

use alloc::format;
use alloc::boxed::Box;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregate::Epsilon;
use crate::dataset::{AlignedDataset, DayRecord, FeatureStats};
use crate::error::{Error, Result};
use crate::eval::{evaluate_days, BacktestReport, PnlMode};
use crate::model::{batch_gradients, Gradients, ModelConfig, ModelParams, Slot};

pub const WINDOW_LEN: usize = 500;
pub const TRAIN_LEN: usize = 400;
pub const VAL_LEN: usize = 50;
pub const TEST_LEN: usize = 50;
pub const WINDOW_STRIDE: usize = 391;
pub const MAX_WINDOWS: usize = 10;

/// Enlargement factors searched by default.
pub const DEFAULT_EPSILONS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// One walk-forward window as half-open day ranges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowSplit {
    pub window_index: usize,
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl WindowSplit {
    pub fn new(window_index: usize, start: usize) -> Self {
        let val = start + TRAIN_LEN;
        let test = val + VAL_LEN;
        Self {
            window_index,
            train: start..val,
            val: val..test,
            test: test..test + TEST_LEN,
        }
    }

    pub fn start(&self) -> usize {
        self.train.start
    }

    pub fn end(&self) -> usize {
        self.test.end
    }
}

/// Windows of 500 days (400/50/50) every 391 days, at most ten.
pub fn make_windows(num_days: usize) -> Result<Vec<WindowSplit>> {
    make_windows_capped(num_days, Some(MAX_WINDOWS))
}

/// [`make_windows`] with a different cap, or none.
pub fn make_windows_capped(num_days: usize, cap: Option<usize>) -> Result<Vec<WindowSplit>> {
    if num_days < WINDOW_LEN {
        return Err(Error::InsufficientData {
            needed: WINDOW_LEN,
            available: num_days,
        });
    }
    let mut count = (num_days - WINDOW_LEN) / WINDOW_STRIDE + 1;
    if let Some(cap) = cap {
        count = count.min(cap);
    }
    Ok((0..count)
        .map(|k| WindowSplit::new(k, k * WINDOW_STRIDE))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Below this many training days every step uses the whole set.
    pub full_batch_below: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    pub epsilon_grid: Vec<f64>,
    pub lookback_grid: Vec<usize>,
    pub seed: u64,
    /// Metric convention used when ranking trials.
    pub selection_mode: PnlMode,
    pub risk_free: f64,
    /// Admits `0` in the epsilon grid (uniform weights). Test use only.
    pub allow_averaging: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            clip_norm: 5.0,
            epochs: 100,
            batch_size: 64,
            full_batch_below: 256,
            patience: 20,
            epsilon_grid: DEFAULT_EPSILONS.to_vec(),
            lookback_grid: crate::model::DEFAULT_LOOKBACKS.to_vec(),
            seed: 0,
            selection_mode: PnlMode::AsWritten,
            risk_free: crate::eval::DEFAULT_RISK_FREE,
            allow_averaging: false,
        }
    }
}

impl TrainConfig {
    /// Grid value as an [`Epsilon`], honoring `allow_averaging`.
    pub fn epsilon(&self, value: f64) -> Result<Epsilon> {
        if self.allow_averaging && value == 0.0 {
            Ok(Epsilon::averaging())
        } else {
            Epsilon::new(value)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("momentum must lie in [0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::validation("clip norm must be > 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("epochs and batch size must be >= 1"));
        }
        if self.epsilon_grid.is_empty() || self.lookback_grid.is_empty() {
            return Err(Error::validation("search grids must be non-empty"));
        }
        for &e in &self.epsilon_grid {
            self.epsilon(e)?;
        }
        if self.lookback_grid.contains(&0) {
            return Err(Error::validation("lookbacks must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub chosen_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// Feature statistics fitted on the training range.
    pub stats: FeatureStats,
    pub history: TrainHistory,
    pub split: WindowSplit,
}

/// Labeled days in `range` whose `lookback`-day window starts at or after
/// `earliest`. Without `include_last` the final day of the range is dropped
/// because its label is read from the next range's first close.
pub fn sample_days(
    dataset: &AlignedDataset,
    range: &Range<usize>,
    earliest: usize,
    lookback: usize,
    include_last: bool,
) -> Vec<usize> {
    let end = if include_last {
        range.end
    } else {
        range.end.saturating_sub(1)
    };
    (range.start..end.min(dataset.len()))
        .filter(|&i| i + 1 >= earliest + lookback)
        .filter(|&i| dataset.records()[i].label.is_some())
        .collect()
}

fn windows_for<'a>(
    data: &'a AlignedDataset,
    days: &[usize],
    t: usize,
) -> Vec<(&'a [DayRecord], bool)> {
    days.iter()
        .map(|&i| {
            let w = data.window(i, t).expect("sample days have full windows");
            (w, data.records()[i].label.expect("sample days are labeled"))
        })
        .collect()
}

fn check_split(dataset: &AlignedDataset, split: &WindowSplit) -> Result<()> {
    let ordered = split.train.start < split.train.end
        && split.train.end == split.val.start
        && split.val.start < split.val.end
        && split.val.end == split.test.start
        && split.test.start < split.test.end;
    if !ordered {
        return Err(Error::validation(format!(
            "window {} ranges must be non-empty, contiguous and ordered",
            split.window_index
        )));
    }
    if split.end() > dataset.len() {
        return Err(Error::OutOfBounds {
            start: split.start(),
            end: split.end(),
            len: dataset.len(),
        });
    }
    Ok(())
}

fn clip_and_step(
    params: &mut ModelParams,
    velocity: &mut Gradients,
    mut grads: Gradients,
    cfg: &TrainConfig,
) {
    let model = *params.config();
    let norm = grads.norm_excluding(|s| model.is_frozen(s));
    if norm > cfg.clip_norm {
        grads.scale(cfg.clip_norm / norm);
    }
    let tensors = params.tensors_mut();
    for slot in Slot::ALL {
        if model.is_frozen(slot) {
            continue;
        }
        let v = &mut velocity.0[slot].data;
        let g = &grads.0[slot].data;
        let p = &mut tensors[slot].data;
        for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = cfg.momentum * *v + g;
            *p -= cfg.learning_rate * *v;
        }
    }
}

fn mean_loss(params: &ModelParams, batch: &[(&[DayRecord], bool)]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut hits = 0usize;
    for (days, label) in batch {
        let trace = crate::model::forward_window(params, days, Some(*label))?;
        loss += trace.loss.unwrap_or_default();
        hits += usize::from(trace.predicts_increase() == *label);
    }
    let n = batch.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Trains one model on `split.train`, early-stopping on `split.val` loss.
///
/// Feature statistics are refit on the training range, so nothing from the
/// validation or test ranges influences the returned parameters except the
/// choice of epoch.
pub fn train_model(
    dataset: &AlignedDataset,
    split: &WindowSplit,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    model.validate()?;
    check_split(dataset, split)?;
    let stats = dataset.fit_stats(split.train.clone())?;
    let data = dataset.restandardize(&stats)?;
    let t = model.lookback;

    let train_days = sample_days(&data, &split.train, split.start(), t, false);
    let val_days = sample_days(&data, &split.val, split.start(), t, false);
    if train_days.is_empty() || val_days.is_empty() {
        return Err(Error::InsufficientData {
            needed: t + 1,
            available: train_days.len().min(val_days.len()),
        });
    }
    let train = windows_for(&data, &train_days, t);
    let val = windows_for(&data, &val_days, t);

    let mut params = ModelParams::init(model)?;
    let mut velocity = Gradients::zeros_like(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch_size = if train.len() < cfg.full_batch_below {
        train.len()
    } else {
        cfg.batch_size
    };

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        chosen_epoch: 0,
    };
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0;
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        if batch_size < train.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            step += 1;
            let batch: Vec<(&[DayRecord], bool)> = chunk.iter().map(|&i| train[i]).collect();
            // windows are well formed here, so a rejected forward pass means
            // the parameters produced non-finite logits
            let (loss, grads) = batch_gradients(&params, &batch).map_err(|e| match e {
                Error::Validation(_) => Error::Diverged { step },
                e => e,
            })?;
            if !loss.is_finite() || !grads.0.is_finite() {
                return Err(Error::Diverged { step });
            }
            epoch_loss += loss * chunk.len() as f64;
            clip_and_step(&mut params, &mut velocity, grads, cfg);
            if !params.tensors().is_finite() {
                return Err(Error::Diverged { step });
            }
        }
        let (val_loss, val_acc) = match mean_loss(&params, &val) {
            Ok(v) => v,
            Err(Error::Validation(_)) => return Err(Error::Diverged { step }),
            Err(e) => return Err(e),
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        history.train_loss.push(epoch_loss / train.len() as f64);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(val_acc);
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
            history.chosen_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience.max(1) {
                break;
            }
        }
    }
    Ok(TrainedModel {
        params: best,
        stats,
        history,
        split: split.clone(),
    })
}

/// Validation and test metrics of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub val: BacktestReport,
    pub test: BacktestReport,
}

/// Scores `model` on its validation and test ranges under `mode`.
pub fn trial_metrics(
    dataset: &AlignedDataset,
    model: &TrainedModel,
    mode: PnlMode,
    risk_free: f64,
) -> Result<TrialMetrics> {
    let data = dataset.restandardize(&model.stats)?;
    let split = &model.split;
    let t = model.params.config().lookback;
    let val_days = sample_days(&data, &split.val, split.start(), t, false);
    let test_days = sample_days(&data, &split.test, split.start(), t, true);
    Ok(TrialMetrics {
        val: evaluate_days(&model.params, &data, &val_days, split.window_index, mode, risk_free)?,
        test: evaluate_days(&model.params, &data, &test_days, split.window_index, mode, risk_free)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Trained {
        model: Box<TrainedModel>,
        metrics: TrialMetrics,
    },
    Diverged {
        step: usize,
    },
}

/// One grid-search point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub window_index: usize,
    pub epsilon: f64,
    pub lookback: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
}

impl Trial {
    pub fn metrics(&self) -> Option<&TrialMetrics> {
        match &self.outcome {
            TrialOutcome::Trained { metrics, .. } => Some(metrics),
            TrialOutcome::Diverged { .. } => None,
        }
    }

    pub fn model(&self) -> Option<&TrainedModel> {
        match &self.outcome {
            TrialOutcome::Trained { model, .. } => Some(model),
            TrialOutcome::Diverged { .. } => None,
        }
    }

    pub fn into_model(self) -> Option<TrainedModel> {
        match self.outcome {
            TrialOutcome::Trained { model, .. } => Some(*model),
            TrialOutcome::Diverged { .. } => None,
        }
    }
}

/// `(epsilon, lookback)` pairs in grid order.
pub fn grid(cfg: &TrainConfig) -> Vec<(f64, usize)> {
    let mut out = Vec::with_capacity(cfg.epsilon_grid.len() * cfg.lookback_grid.len());
    for &e in &cfg.epsilon_grid {
        for &t in &cfg.lookback_grid {
            out.push((e, t));
        }
    }
    out
}

/// Trains and scores a single `(epsilon, lookback)` configuration.
/// Divergence is recorded in the outcome, other failures are returned.
pub fn run_trial(
    dataset: &AlignedDataset,
    split: &WindowSplit,
    base: &ModelConfig,
    cfg: &TrainConfig,
    epsilon: f64,
    lookback: usize,
) -> Result<Trial> {
    let model = ModelConfig {
        epsilon: cfg.epsilon(epsilon)?,
        lookback,
        ..*base
    };
    let outcome = match train_model(dataset, split, &model, cfg) {
        Ok(trained) => {
            let metrics = trial_metrics(dataset, &trained, cfg.selection_mode, cfg.risk_free)?;
            TrialOutcome::Trained {
                model: Box::new(trained),
                metrics,
            }
        }
        Err(Error::Diverged { step }) => TrialOutcome::Diverged { step },
        Err(e) => return Err(e),
    };
    Ok(Trial {
        window_index: split.window_index,
        epsilon,
        lookback,
        seed: cfg.seed,
        outcome,
    })
}

/// Index of the winning trial: highest validation Sharpe (undefined ranks
/// last), then validation accuracy, then the smaller epsilon.
pub fn select_best(trials: &[Trial]) -> Option<usize> {
    let key = |t: &Trial| {
        t.metrics().map(|m| {
            (
                m.val.sharpe.unwrap_or(f64::NEG_INFINITY),
                m.val.accuracy,
                t.epsilon,
            )
        })
    };
    let mut best: Option<(usize, (f64, f64, f64))> = None;
    for (i, trial) in trials.iter().enumerate() {
        let Some(k) = key(trial) else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                k.0 > b.0 || (k.0 == b.0 && (k.1 > b.1 || (k.1 == b.1 && k.2 < b.2)))
            }
        };
        if better {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: usize,
    pub trials: Vec<Trial>,
}

impl TuneResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn best_model(&self) -> &TrainedModel {
        self.best_trial().model().expect("best trial trained")
    }
}

/// Picks the winner among already-run trials.
pub fn finish_tuning(trials: Vec<Trial>) -> Result<TuneResult> {
    let best = select_best(&trials).ok_or(Error::TuningFailed)?;
    Ok(TuneResult { best, trials })
}

/// Exhaustive search over `cfg`'s epsilon and lookback grids.
pub fn tune(
    dataset: &AlignedDataset,
    split: &WindowSplit,
    base: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TuneResult> {
    cfg.validate()?;
    let trials = grid(cfg)
        .into_iter()
        .map(|(e, t)| run_trial(dataset, split, base, cfg, e, t))
        .collect::<Result<Vec<_>>>()?;
    finish_tuning(trials)
}

/// Sample count per window for each lookback, mostly for diagnostics.
pub fn sample_counts(dataset: &AlignedDataset, split: &WindowSplit, lookback: usize) -> [usize; 3] {
    let s = split.start();
    [
        sample_days(dataset, &split.train, s, lookback, false).len(),
        sample_days(dataset, &split.val, s, lookback, false).len(),
        sample_days(dataset, &split.test, s, lookback, true).len(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn ten_windows_for_4019_days() {
        let w = make_windows(4019).unwrap();
        assert_eq!(w.len(), 10);
        assert_eq!(w[0].train, 0..400);
        assert_eq!(w[0].val, 400..450);
        assert_eq!(w[0].test, 450..500);
        assert_eq!(w[9].start(), 3519);
        assert_eq!(w[9].end(), 4019);
        let starts: Vec<usize> = w.iter().map(|s| s.start()).collect();
        assert_eq!(starts, (0..10).map(|k| 391 * k).collect::<Vec<_>>());
    }

    #[test]
    fn boundaries() {
        assert_eq!(make_windows(500).unwrap().len(), 1);
        // 391 + 500 = 891 days are needed for a second window
        assert_eq!(make_windows(890).unwrap().len(), 1);
        assert_eq!(make_windows(891).unwrap().len(), 2);
        assert!(matches!(
            make_windows(499),
            Err(Error::InsufficientData { needed: 500, available: 499 })
        ));
        assert_eq!(make_windows(100_000).unwrap().len(), 10);
        assert_eq!(make_windows_capped(100_000, None).unwrap().len(), 255);
    }

    #[test]
    fn invalid_train_config() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            epsilon_grid: Vec::new(),
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            epsilon_grid: vec![0.5],
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn grid_counts() {
        let cfg = TrainConfig {
            epsilon_grid: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            lookback_grid: vec![1, 3, 5],
            ..TrainConfig::default()
        };
        assert_eq!(grid(&cfg).len(), 15);
    }

    proptest! {
        #[test]
        fn windows_are_pure_and_well_formed(n in 500usize..10_000) {
            let a = make_windows(n).unwrap();
            prop_assert_eq!(&a, &make_windows(n).unwrap());
            prop_assert_eq!(a.len(), ((n - 500) / 391 + 1).min(10));
            for (k, w) in a.iter().enumerate() {
                prop_assert_eq!(w.window_index, k);
                prop_assert_eq!(w.start(), 391 * k);
                prop_assert_eq!(w.train.len(), 400);
                prop_assert_eq!(w.val.len(), 50);
                prop_assert_eq!(w.test.len(), 50);
                prop_assert!(w.end() <= n);
            }
        }
    }
}
