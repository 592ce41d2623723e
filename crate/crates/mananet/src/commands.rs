//! Subcommand bodies. Each returns the lines it wants printed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use mananet_core::aggregate::{homogenization_series, report_from_series, StaticAggregator};
use mananet_core::dataset::{align, AlignedDataset, DailyNews, FeatureStats};
use mananet_core::eval::{backtest, weight_report, Backtest, PnlMode};
use mananet_core::model::{ModelConfig, NewsEncoder};
use mananet_core::synth::{gen_homogenization_corpus, gen_planted_signal_corpus};
use mananet_core::train::{
    finish_tuning, grid, make_windows_capped, run_trial, train_model, Trial, TrainedModel,
    TuneResult, WindowSplit,
};
use rayon::prelude::*;

use crate::checkpoint;
use crate::config::{parse_homogenization_spec, parse_planted_spec, RunConfig};
use crate::io;
use crate::report;

/// Process exit status for a failed command: 1 for numerical failures
/// (divergence, undefined metrics), 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use mananet_core::Error as E;
    let numerical = err.chain().any(|c| {
        matches!(
            c.downcast_ref::<E>(),
            Some(E::Diverged { .. } | E::UndefinedSharpe | E::TuningFailed)
        )
    });
    if numerical {
        1
    } else {
        2
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    io::write_text(path, contents)?;
    Ok(())
}

pub fn analyze(news: &Path, prices: Option<&Path>, out: &Path) -> Result<Vec<String>> {
    let days = io::load_news(news)?;
    let days: Vec<DailyNews> = match prices {
        Some(p) => {
            let bars = io::load_prices(p)?;
            let data = align(&bars, &days, 1, &FeatureStats::identity())?;
            data.records().iter().map(|r| r.news.clone()).collect()
        }
        None => days,
    };
    let series = homogenization_series(&days)?;
    let report = report_from_series(&series).context("homogenization report needs at least two days with news")?;
    write(&out.join("stats.csv"), &report::homogenization_table(&report))?;
    write(&out.join("reduction.csv"), &report::reduction_table(&report))?;
    write(&out.join("kde.csv"), &report::homogenization_kde(&series))?;
    write(&out.join("boxplot.csv"), &report::homogenization_boxplot(&series))?;
    write(&out.join("summary.json"), &report::to_pretty(&report::homogenization_json(&report)))?;
    let r = report.std_reduction;
    Ok(vec![
        format!("days used {} (skipped {})", report.days_used, report.skipped_days),
        format!("std reduction positive {:.4} neutral {:.4} negative {:.4}", r[0], r[1], r[2]),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Corpus {
    Homogenization,
    Planted,
}

pub fn generate(kind: Corpus, spec: &Path, out: &Path) -> Result<Vec<String>> {
    let text = io::read_text(spec)?;
    match kind {
        Corpus::Homogenization => {
            let spec = parse_homogenization_spec(&text).with_context(|| spec.display().to_string())?;
            let (days, gen) = gen_homogenization_corpus(&spec)?;
            io::write_news(&out.join("news.jsonl"), &days)?;
            let moments = |m: &[mananet_core::synth::ChannelMoments; 3]| {
                serde_json::json!({
                    "mean": [m[0].mean, m[1].mean, m[2].mean],
                    "std": [m[0].std, m[1].std, m[2].std],
                })
            };
            let json = serde_json::json!({
                "days": days.len(),
                "items": gen.items,
                "alpha": gen.alpha,
                "target": gen.target.as_ref().map(moments),
                "achieved": moments(&gen.achieved),
            });
            write(&out.join("generation.json"), &report::to_pretty(&json))?;
            Ok(vec![format!("{} days, {} items", days.len(), gen.items)])
        }
        Corpus::Planted => {
            let spec = parse_planted_spec(&text).with_context(|| spec.display().to_string())?;
            let corpus = gen_planted_signal_corpus(&spec)?;
            io::write_prices(&out.join("prices.csv"), &corpus.bars)?;
            io::write_news(&out.join("news.jsonl"), &corpus.news)?;
            io::write_truth(&out.join("truth.csv"), &corpus.truth)?;
            Ok(vec![format!(
                "{} bars, {} news days, {} planted items",
                corpus.bars.len(),
                corpus.news.len(),
                corpus.truth.len()
            )])
        }
    }
}

/// Aligned dataset; news is only read when `with_news` is set.
pub fn load_dataset(cfg: &RunConfig, with_news: bool) -> Result<AlignedDataset> {
    let bars = io::load_prices(cfg.prices()?)?;
    let news = if with_news {
        io::load_news(cfg.news()?)?
    } else {
        Vec::new()
    };
    Ok(align(&bars, &news, 1, &FeatureStats::identity())?)
}

pub fn windows(cfg: &RunConfig, data: &AlignedDataset) -> Result<Vec<WindowSplit>> {
    Ok(make_windows_capped(data.len(), cfg.max_windows)?)
}

pub struct TrainRun {
    pub splits: Vec<WindowSplit>,
    pub results: Vec<TuneResult>,
    /// Wall time per trial, in trial-log order.
    pub timings: Vec<f64>,
}

/// Grid search on every window; trials run in parallel.
pub fn train_windows(cfg: &RunConfig, data: &AlignedDataset) -> Result<TrainRun> {
    let splits = windows(cfg, data)?;
    let base = ModelConfig {
        news: NewsEncoder::Attention,
        ..cfg.model
    };
    let points = grid(&cfg.train);
    let jobs: Vec<(&WindowSplit, f64, usize)> = splits
        .iter()
        .flat_map(|s| points.iter().map(move |&(e, t)| (s, e, t)))
        .collect();
    let done: Vec<(Trial, f64)> = jobs
        .par_iter()
        .map(|&(split, e, t)| {
            let start = Instant::now();
            let trial = run_trial(data, split, &base, &cfg.train, e, t).with_context(|| {
                format!("window {} epsilon {e} lookback {t}", split.window_index)
            })?;
            Ok((trial, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let mut by_window: BTreeMap<usize, Vec<Trial>> = BTreeMap::new();
    let mut timings = Vec::with_capacity(done.len());
    for (trial, secs) in done {
        timings.push(secs);
        by_window.entry(trial.window_index).or_default().push(trial);
    }
    let results = by_window
        .into_iter()
        .map(|(k, trials)| {
            finish_tuning(trials).with_context(|| format!("window {k}: every trial diverged"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainRun {
        splits,
        results,
        timings,
    })
}

pub fn train(config: &Path, timings: Option<&Path>) -> Result<Vec<String>> {
    let cfg = RunConfig::load(config)?;
    let data = load_dataset(&cfg, true)?;
    let run = train_windows(&cfg, &data)?;
    let out = &cfg.out_dir;
    let mut log = String::new();
    let mut times = String::new();
    let mut lines = Vec::new();
    let mut n = 0;
    for result in &run.results {
        for (i, trial) in result.trials.iter().enumerate() {
            log.push_str(&serde_json::to_string(&report::trial_json(trial, i == result.best))?);
            log.push('\n');
            let t = serde_json::json!({
                "window": trial.window_index,
                "epsilon": trial.epsilon,
                "lookback": trial.lookback,
                "wall_seconds": run.timings[n],
            });
            times.push_str(&format!("{t}\n"));
            n += 1;
        }
        let best = result.best_trial();
        let model = result.best_model();
        let k = best.window_index;
        checkpoint::save(&out.join("checkpoints").join(checkpoint::file_name(k)), model)?;
        write(
            &out.join("history").join(format!("window-{k:02}.csv")),
            &report::history_csv(&model.history),
        )?;
        let val = &best.metrics().expect("trained").val;
        lines.push(format!(
            "window {k}: epsilon {} lookback {} val accuracy {:.4} val sharpe {}",
            best.epsilon,
            best.lookback,
            val.accuracy,
            val.sharpe.map_or("undefined".into(), |s| format!("{s:.4}"))
        ));
    }
    write(&out.join("trials.jsonl"), &log)?;
    if let Some(p) = timings {
        write(p, &times)?;
    }
    lines.push(format!("{} checkpoints in {}", run.results.len(), out.join("checkpoints").display()));
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Mana,
    Static(StaticAggregator),
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Mana => "mana",
            Aggregator::Static(a) => a.name(),
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mana" => Ok(Aggregator::Mana),
            other => Ok(Aggregator::Static(other.parse().map_err(|_| {
                anyhow!("unknown aggregator `{other}` (mana, cf, senf, sumf, af, faf, price-only)")
            })?)),
        }
    }
}

fn load_checkpoints(dir: &Path, splits: &[WindowSplit]) -> Result<Vec<TrainedModel>> {
    splits
        .iter()
        .map(|s| {
            let path = dir.join(checkpoint::file_name(s.window_index));
            if !path.exists() {
                bail!("missing checkpoint {}", path.display());
            }
            let model = checkpoint::load(&path)?;
            if model.split != *s {
                bail!("{} was trained on a different window", path.display());
            }
            Ok(model)
        })
        .collect()
}

/// Retrains the head with a static news representation on every window.
/// The lookback of a window's attention checkpoint is reused when present.
pub fn train_baseline(
    cfg: &RunConfig,
    data: &AlignedDataset,
    splits: &[WindowSplit],
    agg: StaticAggregator,
    checkpoints: Option<&Path>,
) -> Result<Vec<TrainedModel>> {
    splits
        .par_iter()
        .map(|split| {
            let lookback = match checkpoints
                .map(|d| d.join(checkpoint::file_name(split.window_index)))
                .filter(|p| p.exists())
            {
                Some(p) => checkpoint::load(&p)?.params.config().lookback,
                None => cfg.train.lookback_grid[0],
            };
            let model = ModelConfig {
                news: NewsEncoder::Static(agg),
                lookback,
                ..cfg.model
            };
            train_model(data, split, &model, &cfg.train)
                .with_context(|| format!("{} baseline, window {}", agg.name(), split.window_index))
        })
        .collect()
}

pub fn run_backtest(
    cfg: &RunConfig,
    checkpoints: &Path,
    aggregators: &[Aggregator],
    mode: PnlMode,
) -> Result<Vec<(Aggregator, Backtest)>> {
    let needs_news = aggregators
        .iter()
        .any(|a| *a != Aggregator::Static(StaticAggregator::PriceOnly));
    let data = load_dataset(cfg, needs_news)?;
    let splits = windows(cfg, &data)?;
    aggregators
        .iter()
        .map(|&agg| {
            let models = match agg {
                Aggregator::Mana => load_checkpoints(checkpoints, &splits)?,
                Aggregator::Static(a) => {
                    let dir = checkpoints.exists().then_some(checkpoints);
                    train_baseline(cfg, &data, &splits, a, dir)?
                }
            };
            let bt = backtest(&models, &data, &splits, mode, cfg.train.risk_free)?;
            Ok((agg, bt))
        })
        .collect()
}

pub fn backtest_cmd(
    config: &Path,
    checkpoints: &Path,
    aggregators: &[Aggregator],
    mode: PnlMode,
) -> Result<Vec<String>> {
    let cfg = RunConfig::load(config)?;
    let results = run_backtest(&cfg, checkpoints, aggregators, mode)?;
    let root = cfg.out_dir.join("backtest").join(mode.name());
    let mut table = String::from("aggregator,windows,accuracy,pnl,sharpe,undefined_sharpe_windows\n");
    let mut lines = Vec::new();
    let mut curves = Vec::new();
    for (agg, bt) in &results {
        let dir = root.join(agg.name());
        for w in &bt.windows {
            let k = w.window_index;
            write(&dir.join(format!("window-{k:02}.csv")), &report::backtest_days_csv(w))?;
            write(
                &dir.join(format!("window-{k:02}.json")),
                &report::to_pretty(&report::backtest_json(w)),
            )?;
        }
        write(&dir.join("mean.json"), &report::to_pretty(&report::mean_json(&bt.mean)))?;
        let m = &bt.mean;
        let sharpe = m.sharpe.map_or(String::new(), |s| s.to_string());
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            agg.name(),
            m.windows,
            m.accuracy,
            m.pnl,
            sharpe,
            m.undefined_sharpe_windows
        ));
        lines.push(format!(
            "{:<10} accuracy {:.4} pnl {:.5} sharpe {}",
            agg.name(),
            m.accuracy,
            m.pnl,
            m.sharpe.map_or("undefined".into(), |s| format!("{s:.4}"))
        ));
        let mut acc = 0.0;
        let mut curve = Vec::new();
        for d in bt.windows.iter().flat_map(|w| w.days.iter()) {
            acc += d.contribution;
            curve.push((curve.len() as f64, acc));
        }
        curves.push((agg.name().to_string(), curve));
    }
    write(&root.join("comparison.csv"), &table)?;
    write(
        &root.join("cumulative_pnl.svg"),
        &report::line_svg(
            &format!("cumulative PnL ({})", mode.name()),
            "test day (windows concatenated)",
            &curves,
        ),
    )?;
    Ok(lines)
}

pub fn weights(
    checkpoint_path: &Path,
    news: &Path,
    prices: &Path,
    truth: Option<&Path>,
    out: &Path,
) -> Result<Vec<String>> {
    let model = checkpoint::load(checkpoint_path)?;
    let bars = io::load_prices(prices)?;
    let days = io::load_news(news)?;
    let lookback = model.params.config().lookback;
    let data = align(&bars, &days, lookback, &FeatureStats::identity())?.restandardize(&model.stats)?;
    let report = weight_report(&model.params, &data)
        .context("weight report needs days with at least two news items")?;
    let planted = match truth {
        Some(p) => {
            let ids: std::collections::HashSet<(mananet_core::NaiveDate, String)> = io::load_truth(p)?
                .into_iter()
                .map(|t| (t.date, t.id))
                .collect();
            report.summary_of(|w| ids.contains(&(w.date, w.id.clone())))
        }
        None => None,
    };
    write(&out.join("weights.csv"), &report::weights_csv(&report))?;
    write(&out.join("weights_kde.csv"), &report::weight_kde_csv(&report))?;
    write(
        &out.join("weights.json"),
        &report::to_pretty(&report::weight_json(&report, planted)),
    )?;
    let pct: Vec<(f64, f64)> = report.percentiles.iter().map(|&(p, v)| (p, v)).collect();
    write(
        &out.join("percentiles.svg"),
        &report::line_svg("normalized weight percentiles", "percentile", &[("weights".into(), pct)]),
    )?;
    let mut lines = vec![format!(
        "{} items over {} days; above 0.98: {:.4}; below 0.5: {:.4}",
        report.weights.len(),
        report.days_used,
        report.fraction_above_098,
        report.fraction_below_05
    )];
    if let Some((mean, rank, n)) = planted {
        lines.push(format!("planted items {n}: mean normalized weight {mean:.4}, mean rank {rank:.2}"));
    }
    Ok(lines)
}
