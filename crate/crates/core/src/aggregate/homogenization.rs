use alloc::vec::Vec;

use super::baseline::{aggregate_af, aggregate_cf};
use super::stats::{summary_stats, SummaryStats};
use crate::dataset::DailyNews;
use crate::error::{Error, Result};

pub const CHANNELS: [&str; 3] = ["positive", "neutral", "negative"];

/// Aggregation level of a statistics row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Individual,
    DailyAverage,
    DailyCountRatio,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Individual, Level::DailyAverage, Level::DailyCountRatio];

    pub fn name(self) -> &'static str {
        match self {
            Level::Individual => "individual",
            Level::DailyAverage => "daily_average",
            Level::DailyCountRatio => "daily_count_ratio",
        }
    }
}

/// Per-channel statistics of individual items, daily averages and daily
/// count ratios over one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizationReport {
    pub individual: [SummaryStats; 3],
    pub daily_average: [SummaryStats; 3],
    pub daily_count_ratio: [SummaryStats; 3],
    /// `1 - std(daily average) / std(individual)` per channel.
    pub std_reduction: [f64; 3],
    /// Same reduction for the daily count ratios.
    pub count_std_reduction: [f64; 3],
    pub days_used: usize,
    pub skipped_days: usize,
}

impl HomogenizationReport {
    pub fn level(&self, level: Level) -> &[SummaryStats; 3] {
        match level {
            Level::Individual => &self.individual,
            Level::DailyAverage => &self.daily_average,
            Level::DailyCountRatio => &self.daily_count_ratio,
        }
    }
}

fn reduction(daily: f64, individual: f64) -> f64 {
    if individual == 0.0 {
        0.0
    } else {
        1.0 - daily / individual
    }
}

fn channel_stats(columns: &[Vec<f64>; 3]) -> Result<[SummaryStats; 3]> {
    Ok([
        summary_stats(&columns[0])?,
        summary_stats(&columns[1])?,
        summary_stats(&columns[2])?,
    ])
}

/// Raw per-channel values behind a [`HomogenizationReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HomogenizationSeries {
    pub individual: [Vec<f64>; 3],
    pub daily_average: [Vec<f64>; 3],
    pub daily_count_ratio: [Vec<f64>; 3],
    pub skipped_days: usize,
}

impl HomogenizationSeries {
    pub fn level(&self, level: Level) -> &[Vec<f64>; 3] {
        match level {
            Level::Individual => &self.individual,
            Level::DailyAverage => &self.daily_average,
            Level::DailyCountRatio => &self.daily_count_ratio,
        }
    }
}

/// Individual values, daily averages and daily count ratios per channel.
/// Empty days are skipped and counted.
pub fn homogenization_series(corpus: &[DailyNews]) -> Result<HomogenizationSeries> {
    let mut out = HomogenizationSeries::default();
    for day in corpus {
        if day.is_empty() {
            out.skipped_days += 1;
            continue;
        }
        for s in day.sentiments() {
            for (col, x) in out.individual.iter_mut().zip(s.as_array()) {
                col.push(x);
            }
        }
        for (col, x) in out.daily_average.iter_mut().zip(aggregate_af(day)?) {
            col.push(x);
        }
        for (col, x) in out.daily_count_ratio.iter_mut().zip(aggregate_cf(day)?) {
            col.push(x);
        }
    }
    Ok(out)
}

/// Homogenization statistics; empty days are skipped and counted.
pub fn homogenization_report(corpus: &[DailyNews]) -> Result<HomogenizationReport> {
    report_from_series(&homogenization_series(corpus)?)
}

pub fn report_from_series(series: &HomogenizationSeries) -> Result<HomogenizationReport> {
    let days_used = series.daily_average[0].len();
    if days_used < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: days_used,
        });
    }
    let skipped = series.skipped_days;
    let (individual, average, ratio) = (
        &series.individual,
        &series.daily_average,
        &series.daily_count_ratio,
    );
    let individual = channel_stats(individual)?;
    let daily_average = channel_stats(average)?;
    let daily_count_ratio = channel_stats(ratio)?;
    let std_reduction =
        core::array::from_fn(|c| reduction(daily_average[c].std, individual[c].std));
    let count_std_reduction =
        core::array::from_fn(|c| reduction(daily_count_ratio[c].std, individual[c].std));
    Ok(HomogenizationReport {
        individual,
        daily_average,
        daily_count_ratio,
        std_reduction,
        count_std_reduction,
        days_used,
        skipped_days: skipped,
    })
}
