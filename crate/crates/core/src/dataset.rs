//! Price bars, news sentiment, labels and the day-aligned dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::math;

/// Sums within this distance of 1 are accepted as-is.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;
/// Sums within this distance of 1 (but outside [`SIMPLEX_TOLERANCE`]) are renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

/// Number of entries in a [`PriceFeatureVector`].
pub const PRICE_FEATURES: usize = 6;

/// One daily OHLCV record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl PriceBar {
    pub fn validate(&self) -> Result<()> {
        let prices = [self.open, self.high, self.low, self.close, self.adj_close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::validation(format!(
                "{}: prices must be finite and positive",
                self.date
            )));
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(Error::validation(format!(
                "{}: volume must be finite and non-negative",
                self.date
            )));
        }
        if self.low > self.open.min(self.close) || self.high < self.open.max(self.close) {
            return Err(Error::validation(format!(
                "{}: OHLC bounds violated (low {} high {} open {} close {})",
                self.date, self.low, self.high, self.open, self.close
            )));
        }
        Ok(())
    }
}

/// Per-news (positive, neutral, negative) scores on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentTriple {
    pos: f64,
    neu: f64,
    neg: f64,
}

impl SentimentTriple {
    /// Validates the simplex constraint.
    ///
    /// A sum within [`SIMPLEX_TOLERANCE`] of one is kept verbatim, a sum within
    /// [`RENORMALIZE_TOLERANCE`] is rescaled onto the simplex and anything else
    /// is rejected.
    pub fn new(pos: f64, neu: f64, neg: f64) -> Result<Self> {
        let raw = [pos, neu, neg];
        if raw.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(Error::validation(format!(
                "sentiment ({pos}, {neu}, {neg}) has a component outside [0, 1]"
            )));
        }
        let sum = pos + neu + neg;
        let dev = math::abs(sum - 1.0);
        if dev <= SIMPLEX_TOLERANCE {
            Ok(Self { pos, neu, neg })
        } else if dev <= RENORMALIZE_TOLERANCE {
            Ok(Self {
                pos: pos / sum,
                neu: neu / sum,
                neg: neg / sum,
            })
        } else {
            Err(Error::validation(format!(
                "sentiment ({pos}, {neu}, {neg}) sums to {sum}, outside tolerance"
            )))
        }
    }

    /// Builds a triple from two components, setting the negative score to the remainder.
    pub fn from_pos_neu(pos: f64, neu: f64) -> Result<Self> {
        Self::new(pos, neu, (1.0 - pos - neu).max(0.0))
    }

    pub fn pos(&self) -> f64 {
        self.pos
    }

    pub fn neu(&self) -> f64 {
        self.neu
    }

    pub fn neg(&self) -> f64 {
        self.neg
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.pos, self.neu, self.neg]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewsItem {
    pub id: String,
    pub sentiment: SentimentTriple,
}

impl NewsItem {
    pub fn new(id: impl Into<String>, sentiment: SentimentTriple) -> Self {
        Self {
            id: id.into(),
            sentiment,
        }
    }
}

/// The news set of one calendar (or trading) day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyNews {
    pub date: NaiveDate,
    pub items: Vec<NewsItem>,
}

impl DailyNews {
    pub fn new(date: NaiveDate, items: Vec<NewsItem>) -> Self {
        Self { date, items }
    }

    pub fn empty(date: NaiveDate) -> Self {
        Self {
            date,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sentiments(&self) -> impl Iterator<Item = &SentimentTriple> + '_ {
        self.items.iter().map(|item| &item.sentiment)
    }
}

/// Location and scale of a single feature over a training range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    pub fn is_degenerate(&self) -> bool {
        self.std == 0.0
    }

    /// Z-score, or exactly 0 for a zero-variance feature.
    pub fn standardize(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }
}

/// Normalization statistics for the z-scored price features, fitted on a
/// training range only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStats {
    pub log_volume: Moments,
    pub close: Moments,
}

impl FeatureStats {
    /// Stats that leave values unscaled apart from centering at zero mean.
    pub fn identity() -> Self {
        let unit = Moments {
            mean: 0.0,
            std: 1.0,
        };
        Self {
            log_volume: unit,
            close: unit,
        }
    }

    pub fn degenerate_features(&self) -> Vec<&'static str> {
        let mut flagged = Vec::new();
        if self.log_volume.is_degenerate() {
            flagged.push("log_volume");
        }
        if self.close.is_degenerate() {
            flagged.push("close");
        }
        flagged
    }
}

/// Encoded price features of one trading day.
///
/// Entries: close log-return, adjusted-close log-return, `(high - low) / close`,
/// `(close - open) / open`, z-scored `ln(1 + volume)` and z-scored close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceFeatureVector(pub [f64; PRICE_FEATURES]);

impl PriceFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Binary next-day direction labels; `true` iff the next close is strictly higher.
pub fn label_days(closes: &[f64]) -> Result<Vec<bool>> {
    if closes.len() < 2 {
        return Err(Error::EmptySeries("label_days needs at least two closes"));
    }
    if let Some(bad) = closes.iter().find(|c| !c.is_finite() || **c <= 0.0) {
        return Err(Error::validation(format!("non-positive close {bad}")));
    }
    Ok(closes.windows(2).map(|w| w[1] > w[0]).collect())
}

fn log_volume(bar: &PriceBar) -> f64 {
    math::ln_1p(bar.volume)
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> Moments {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    let std = if n > 1.0 { math::sqrt(ss / (n - 1.0)) } else { 0.0 };
    Moments { mean, std }
}

/// Fits normalization statistics over `bars[range]` (sample std, ddof = 1).
pub fn fit_feature_stats(bars: &[PriceBar], range: Range<usize>) -> Result<FeatureStats> {
    if range.start > range.end || range.end > bars.len() {
        return Err(Error::OutOfBounds {
            start: range.start,
            end: range.end,
            len: bars.len(),
        });
    }
    if range.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: range.len(),
        });
    }
    let slice = &bars[range];
    Ok(FeatureStats {
        log_volume: moments(slice.iter().map(log_volume)),
        close: moments(slice.iter().map(|b| b.close)),
    })
}

/// Encodes `bars[1..]` into price feature vectors; the first bar only
/// supplies the previous close.
pub fn engineer_price_features(
    bars: &[PriceBar],
    stats: &FeatureStats,
) -> Result<Vec<PriceFeatureVector>> {
    if bars.len() < 2 {
        return Err(Error::EmptySeries("price features need at least two bars"));
    }
    for bar in bars {
        bar.validate()?;
    }
    let features = bars
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            PriceFeatureVector([
                math::ln(cur.close / prev.close),
                math::ln(cur.adj_close / prev.adj_close),
                (cur.high - cur.low) / cur.close,
                (cur.close - cur.open) / cur.open,
                stats.log_volume.standardize(log_volume(cur)),
                stats.close.standardize(cur.close),
            ])
        })
        .collect::<Vec<_>>();
    if features.iter().any(|f| f.0.iter().any(|x| !x.is_finite())) {
        return Err(Error::validation("non-finite price feature"));
    }
    Ok(features)
}

/// One trading day of the aligned dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub features: PriceFeatureVector,
    pub news: DailyNews,
    /// `Some(true)` when the next trading day closes higher; `None` on the last day.
    pub label: Option<bool>,
}

/// Day-indexed price features, news sets and labels.
///
/// Record `i` corresponds to `bars[i + 1]`; `bars[0]` only seeds the returns
/// of the first record.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    bars: Vec<PriceBar>,
    records: Vec<DayRecord>,
    lookback: usize,
    unattributed_news: usize,
}

/// Aligns news to trading days.
///
/// News on a non-trading day rolls forward to the next trading day. News on
/// or before the first bar, or after the last bar, has no record and is
/// counted in [`AlignedDataset::unattributed_news`].
pub fn align(
    bars: &[PriceBar],
    news_days: &[DailyNews],
    lookback: usize,
    stats: &FeatureStats,
) -> Result<AlignedDataset> {
    if lookback == 0 {
        return Err(Error::validation("lookback must be at least 1"));
    }
    for w in bars.windows(2) {
        if w[1].date <= w[0].date {
            return Err(Error::validation(format!(
                "bar dates must be strictly increasing ({} then {})",
                w[0].date, w[1].date
            )));
        }
    }
    let features = engineer_price_features(bars, stats)?;

    let mut buckets: Vec<Vec<(NaiveDate, usize, &DailyNews)>> =
        (0..features.len()).map(|_| Vec::new()).collect();
    let mut unattributed = 0;
    for (order, day) in news_days.iter().enumerate() {
        let bar_idx = bars.partition_point(|b| b.date < day.date);
        if bar_idx == 0 || bar_idx >= bars.len() {
            unattributed += day.len();
            continue;
        }
        buckets[bar_idx - 1].push((day.date, order, day));
    }

    let records = features
        .into_iter()
        .zip(buckets)
        .enumerate()
        .map(|(i, (features, mut bucket))| {
            bucket.sort_by_key(|(date, order, _)| (*date, *order));
            let bar = &bars[i + 1];
            let items = bucket
                .into_iter()
                .flat_map(|(_, _, day)| day.items.iter().cloned())
                .collect();
            let label = bars.get(i + 2).map(|next| next.close > bar.close);
            DayRecord {
                date: bar.date,
                features,
                news: DailyNews::new(bar.date, items),
                label,
            }
        })
        .collect();

    Ok(AlignedDataset {
        bars: bars.to_vec(),
        records,
        lookback,
        unattributed_news: unattributed,
    })
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DayRecord] {
        &self.records
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn unattributed_news(&self) -> usize {
        self.unattributed_news
    }

    /// Close price of record `i`'s trading day.
    pub fn close(&self, i: usize) -> f64 {
        self.bars[i + 1].close
    }

    /// Whether record `i` has at least `lookback - 1` predecessors.
    pub fn is_usable(&self, i: usize) -> bool {
        i + 1 >= self.lookback && i < self.records.len()
    }

    /// The `t` consecutive records ending at `end` (inclusive), oldest first.
    pub fn window(&self, end: usize, t: usize) -> Option<&[DayRecord]> {
        if t == 0 || end + 1 < t || end >= self.records.len() {
            return None;
        }
        Some(&self.records[end + 1 - t..=end])
    }

    /// Fits feature stats on the bars belonging to the records in `days`.
    pub fn fit_stats(&self, days: Range<usize>) -> Result<FeatureStats> {
        if days.end > self.records.len() {
            return Err(Error::OutOfBounds {
                start: days.start,
                end: days.end,
                len: self.records.len(),
            });
        }
        fit_feature_stats(&self.bars, days.start + 1..days.end + 1)
    }

    /// Same records with price features recomputed under `stats`.
    pub fn restandardize(&self, stats: &FeatureStats) -> Result<Self> {
        let features = engineer_price_features(&self.bars, stats)?;
        let records = self
            .records
            .iter()
            .zip(features)
            .map(|(r, features)| DayRecord {
                features,
                ..r.clone()
            })
            .collect();
        Ok(Self {
            records,
            ..self.clone_header()
        })
    }

    pub fn with_lookback(&self, lookback: usize) -> Result<Self> {
        if lookback == 0 {
            return Err(Error::validation("lookback must be at least 1"));
        }
        Ok(Self {
            lookback,
            ..self.clone()
        })
    }

    fn clone_header(&self) -> Self {
        Self {
            bars: self.bars.clone(),
            records: Vec::new(),
            lookback: self.lookback,
            unattributed_news: self.unattributed_news,
        }
    }
}
