//! End-to-end training, tuning and backtesting on small synthetic markets.

use std::collections::HashSet;

use mananet_core::aggregate::{aggregate_af, Epsilon, StaticAggregator};
use mananet_core::dataset::{align, AlignedDataset, FeatureStats, NewsItem, PriceBar};
use mananet_core::eval::{backtest, weight_report, PnlMode};
use mananet_core::model::{forward_day, HeadKind, ModelConfig, ModelParams, NewsEncoder};
use mananet_core::synth::{gen_planted_signal_corpus, PlantedCorpus, PlantedSignalSpec};
use mananet_core::train::*;
use mananet_core::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_corpus(days: usize, noise: usize, strength: f64) -> PlantedCorpus {
    gen_planted_signal_corpus(&PlantedSignalSpec {
        num_days: days,
        noise_per_day: noise,
        signal_strength: strength,
        seed: 5,
        ..PlantedSignalSpec::default()
    })
    .unwrap()
}

fn dataset(c: &PlantedCorpus) -> AlignedDataset {
    align(&c.bars, &c.news, 1, &FeatureStats::identity()).unwrap()
}

fn small_model() -> ModelConfig {
    ModelConfig {
        d_k: 3,
        d_v: 4,
        d_e: 4,
        hidden_width: 8,
        ..ModelConfig::default()
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.03,
        epochs: 40,
        patience: 10,
        epsilon_grid: vec![1.0],
        lookback_grid: vec![1],
        selection_mode: PnlMode::Directional,
        risk_free: 0.0,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_same_history() {
    let c = small_corpus(520, 6, 0.8);
    let data = dataset(&c);
    let split = &make_windows(data.len()).unwrap()[0];
    let a = train_model(&data, split, &small_model(), &quick_train()).unwrap();
    let b = train_model(&data, split, &small_model(), &quick_train()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    assert_eq!(a.history.train_loss.len(), a.history.val_loss.len());
    assert_eq!(a.history.val_loss.len(), a.history.val_accuracy.len());
    assert!(a.history.chosen_epoch >= 1 && a.history.chosen_epoch <= 40);
}

#[test]
fn early_stopping_keeps_best_epoch() {
    let c = small_corpus(520, 6, 0.3);
    let data = dataset(&c);
    let split = &make_windows(data.len()).unwrap()[0];
    let cfg = TrainConfig {
        learning_rate: 0.3,
        epochs: 60,
        patience: 5,
        ..quick_train()
    };
    let trained = train_model(&data, split, &small_model(), &cfg).unwrap();
    let h = &trained.history;
    let best = h
        .val_loss
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(h.chosen_epoch, best.0 + 1);

    // re-scoring the returned params reproduces the chosen epoch's val loss
    let m = trial_metrics(&data, &trained, PnlMode::Directional, 0.0).unwrap();
    assert!((m.val.mean_loss - best.1).abs() < 1e-12);
    assert!((m.val.accuracy - h.val_accuracy[best.0]).abs() < 1e-12);
}

#[test]
fn test_range_mutation_leaves_training_untouched() {
    let c = small_corpus(520, 6, 0.8);
    let split = make_windows(519).unwrap()[0].clone();
    let data = dataset(&c);
    let base = train_model(&data, &split, &small_model(), &quick_train()).unwrap();

    let first_test_date = data.records()[split.test.start].date;
    let mut bars: Vec<PriceBar> = c.bars.clone();
    for b in bars.iter_mut().filter(|b| b.date >= first_test_date) {
        b.close *= 1.7;
        b.adj_close *= 1.7;
        b.high *= 1.7;
        b.volume *= 3.0;
    }
    let mut news = c.news.clone();
    for day in news.iter_mut().filter(|d| d.date >= first_test_date) {
        day.items.truncate(1);
        day.items.push(NewsItem::new(
            "x",
            mananet_core::dataset::SentimentTriple::new(0.1, 0.1, 0.8).unwrap(),
        ));
    }
    let mutated = align(&bars, &news, 1, &FeatureStats::identity()).unwrap();
    assert_ne!(mutated.records()[split.test.start..], data.records()[split.test.start..]);
    let again = train_model(&mutated, &split, &small_model(), &quick_train()).unwrap();
    assert_eq!(base.params, again.params);
    assert_eq!(base.stats, again.stats);
    assert_eq!(base.history, again.history);
}

#[test]
fn split_outside_dataset_is_rejected() {
    let c = small_corpus(300, 2, 0.8);
    let data = dataset(&c);
    let split = WindowSplit::new(0, 0);
    assert!(matches!(
        train_model(&data, &split, &small_model(), &quick_train()),
        Err(Error::OutOfBounds { .. })
    ));
}

/// Daily returns permuted so labels lose their link to the news.
fn shuffled_market(c: &PlantedCorpus, seed: u64) -> Vec<PriceBar> {
    let mut returns: Vec<f64> = c.bars.windows(2).map(|w| w[1].close / w[0].close).collect();
    returns.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut bars = c.bars.clone();
    for i in 1..bars.len() {
        let prev = bars[i - 1].close;
        let close = prev * returns[i - 1];
        let b = &mut bars[i];
        b.open = prev;
        b.close = close;
        b.adj_close = close;
        b.high = prev.max(close) * 1.001;
        b.low = prev.min(close) * 0.999;
    }
    bars
}

#[test]
fn shuffled_labels_carry_no_signal() {
    let c = small_corpus(900, 8, 0.8);
    let mut accs = Vec::new();
    for seed in 0..3 {
        let bars = shuffled_market(&c, seed);
        let data = align(&bars, &c.news, 1, &FeatureStats::identity()).unwrap();
        for split in make_windows(data.len()).unwrap() {
            let tm = train_model(&data, &split, &small_model(), &quick_train()).unwrap();
            let m = trial_metrics(&data, &tm, PnlMode::Directional, 0.0).unwrap();
            accs.push(m.val.accuracy);
        }
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((0.4..=0.6).contains(&mean), "{accs:?}");
}

#[test]
fn singleton_grid_returns_that_configuration() {
    let c = small_corpus(520, 6, 0.8);
    let data = dataset(&c);
    let split = &make_windows(data.len()).unwrap()[0];
    let cfg = TrainConfig {
        epsilon_grid: vec![4.0],
        lookback_grid: vec![3],
        ..quick_train()
    };
    let result = tune(&data, split, &small_model(), &cfg).unwrap();
    assert_eq!(result.trials.len(), 1);
    let best = result.best_trial();
    assert_eq!((best.epsilon, best.lookback), (4.0, 3));
    assert_eq!(result.best_model().params.config().lookback, 3);
    assert_eq!(result.best_model().params.config().epsilon.get(), 4.0);
}

#[test]
fn tuning_selects_by_validation_sharpe() {
    let c = small_corpus(520, 6, 0.8);
    let data = dataset(&c);
    let split = &make_windows(data.len()).unwrap()[0];
    let cfg = TrainConfig {
        epsilon_grid: vec![1.0, 8.0],
        lookback_grid: vec![1, 3],
        ..quick_train()
    };
    let result = tune(&data, split, &small_model(), &cfg).unwrap();
    assert_eq!(result.trials.len(), 4);
    let chosen = result.best_trial().metrics().unwrap().val.sharpe.unwrap_or(f64::NEG_INFINITY);
    for t in &result.trials {
        let s = t.metrics().unwrap().val.sharpe.unwrap_or(f64::NEG_INFINITY);
        assert!(chosen >= s);
    }
}

#[test]
fn divergent_grid_fails_tuning() {
    let c = small_corpus(520, 6, 0.8);
    let data = dataset(&c);
    let split = &make_windows(data.len()).unwrap()[0];
    let cfg = TrainConfig {
        learning_rate: 1e300,
        clip_norm: 1e300,
        ..quick_train()
    };
    let trial = run_trial(&data, split, &small_model(), &cfg, 1.0, 1).unwrap();
    assert!(matches!(trial.outcome, TrialOutcome::Diverged { .. }));
    assert_eq!(tune(&data, split, &small_model(), &cfg), Err(Error::TuningFailed));
}

#[test]
fn backtest_means_and_missing_windows() {
    let c = small_corpus(900, 6, 0.8);
    let data = dataset(&c);
    let splits = make_windows(data.len()).unwrap();
    assert_eq!(splits.len(), 2);
    let models: Vec<TrainedModel> = splits
        .iter()
        .map(|s| train_model(&data, s, &small_model(), &quick_train()).unwrap())
        .collect();
    let report = backtest(&models, &data, &splits, PnlMode::AsWritten, 0.02).unwrap();
    let n = report.windows.len() as f64;
    let acc = report.windows.iter().map(|w| w.accuracy).sum::<f64>() / n;
    let pnl = report.windows.iter().map(|w| w.pnl).sum::<f64>() / n;
    assert!((report.mean.accuracy - acc).abs() < 1e-12);
    assert!((report.mean.pnl - pnl).abs() < 1e-12);
    for w in &report.windows {
        let sum: f64 = w.days.iter().map(|d| d.contribution).sum();
        assert!((w.pnl - sum).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&w.accuracy));
        let test = &splits[w.window_index].test;
        let labeled = test.clone().filter(|&i| data.records()[i].label.is_some()).count();
        assert_eq!(w.days.len(), labeled);
    }
    assert!(matches!(
        backtest(&models[..1], &data, &splits, PnlMode::AsWritten, 0.02),
        Err(Error::Validation(_))
    ));
}

/// Mean-of-sentiments model and the equal-weight baseline agree end to end.
#[test]
fn averaging_attention_matches_af_pipeline() {
    let c = small_corpus(520, 6, 0.8);
    let data = dataset(&c);
    let split = &make_windows(data.len()).unwrap()[0];
    let mana = ModelConfig {
        d_v: 3,
        identity_values: true,
        epsilon: Epsilon::averaging(),
        ..small_model()
    };
    let af = ModelConfig {
        news: NewsEncoder::Static(StaticAggregator::Af),
        ..small_model()
    };
    let params = ModelParams::init(&mana).unwrap();
    for r in data.records().iter().take(50) {
        let (m, out) = forward_day(&params, &r.features, &r.news).unwrap();
        let mean = aggregate_af(&r.news).unwrap();
        for j in 0..3 {
            assert!((out.attf[j] - mean[j]).abs() < 1e-12);
            assert!((m[mana.d_e + j] - mean[j]).abs() < 1e-12);
        }
    }
    let a = train_model(&data, split, &mana, &quick_train()).unwrap();
    let b = train_model(&data, split, &af, &quick_train()).unwrap();
    for mode in [PnlMode::AsWritten, PnlMode::Directional] {
        let ma = trial_metrics(&data, &a, mode, 0.02).unwrap().test;
        let mb = trial_metrics(&data, &b, mode, 0.02).unwrap().test;
        assert!((ma.accuracy - mb.accuracy).abs() < 1e-9);
        assert!((ma.pnl - mb.pnl).abs() < 1e-9);
        assert!((ma.sharpe.unwrap() - mb.sharpe.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn weight_report_invariants() {
    let c = small_corpus(200, 6, 0.8);
    let data = dataset(&c);
    let params = ModelParams::init(&ModelConfig {
        epsilon: Epsilon::new(4.0).unwrap(),
        ..small_model()
    })
    .unwrap();
    let report = weight_report(&params, &data).unwrap();
    assert!(report.weights.iter().all(|w| (0.0..=1.0).contains(&w.normalized)));
    assert!(report.percentiles.windows(2).all(|p| p[0].1 <= p[1].1));
    assert_eq!(report.days_used + report.degenerate_days + report.skipped_days, data.len());
    let planted: HashSet<&str> = c.truth.iter().map(|t| t.id.as_str()).collect();
    assert!(report.summary_of(|w| planted.contains(w.id.as_str())).is_some());

    let averaging = ModelParams::init(&ModelConfig {
        epsilon: Epsilon::averaging(),
        ..small_model()
    })
    .unwrap();
    let flat = weight_report(&averaging, &data);
    assert_eq!(flat, Err(Error::EmptyReport));

    let single = small_corpus(50, 0, 0.8);
    assert_eq!(weight_report(&params, &dataset(&single)), Err(Error::EmptyReport));
}

#[test]
fn static_encoders_have_no_weight_report() {
    let c = small_corpus(100, 3, 0.8);
    let data = dataset(&c);
    for agg in StaticAggregator::ALL {
        let cfg = ModelConfig {
            news: NewsEncoder::Static(agg),
            head: HeadKind::Shallow,
            ..small_model()
        };
        let params = ModelParams::init(&cfg).unwrap();
        assert!(weight_report(&params, &data).is_err());
        let r = &data.records()[10];
        assert_eq!(forward_day(&params, &r.features, &r.news).unwrap().0.len(), cfg.day_dim());
    }
}
