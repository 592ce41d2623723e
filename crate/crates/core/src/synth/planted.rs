use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{day_rng, default_start, trading_days};
use crate::dataset::{DailyNews, NewsItem, PriceBar, SentimentTriple};
use crate::error::{Error, Result};

/// Market with one informative item hidden among near-neutral noise each day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSignalSpec {
    /// Trading days with news; one extra seed bar precedes them.
    pub num_days: usize,
    pub noise_per_day: usize,
    /// In `[0, 1]`. Zero makes returns independent of the planted items.
    pub signal_strength: f64,
    pub base_volatility: f64,
    pub drift: f64,
    pub seed: u64,
    pub start: NaiveDate,
    pub start_price: f64,
}

impl Default for PlantedSignalSpec {
    fn default() -> Self {
        Self {
            num_days: 900,
            noise_per_day: 50,
            signal_strength: 0.8,
            base_volatility: 0.01,
            drift: 0.0,
            seed: 0,
            start: default_start(),
            start_price: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth {
    pub date: NaiveDate,
    pub id: String,
    /// `true` for a positive planted item.
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub bars: Vec<PriceBar>,
    pub news: Vec<DailyNews>,
    pub truth: Vec<PlantedTruth>,
}

impl PlantedSignalSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::Generation("signal_strength must lie in [0, 1]".into()));
        }
        if !(self.base_volatility > 0.0 && self.base_volatility < 0.2) {
            return Err(Error::Generation("base_volatility must lie in (0, 0.2)".into()));
        }
        if !(self.start_price > 0.0) || !self.drift.is_finite() || self.drift.abs() >= 0.1 {
            return Err(Error::Generation("start_price must be > 0 and |drift| < 0.1".into()));
        }
        if self.num_days < 2 {
            return Err(Error::Generation("num_days must be at least 2".into()));
        }
        Ok(())
    }
}

fn noise_item(rng: &mut impl Rng, mood: f64) -> SentimentTriple {
    let neu: f64 = rng.random_range(0.3..1.0);
    let tilt = (mood + rng.random_range(-0.25..0.25)).clamp(0.0, 1.0);
    let pos = (1.0 - neu) * tilt;
    SentimentTriple::from_pos_neu(pos, neu).expect("valid noise triple")
}

fn planted_item(rng: &mut impl Rng, positive: bool) -> SentimentTriple {
    let dominant: f64 = rng.random_range(0.82..0.95);
    let rest = 1.0 - dominant;
    let neu = rest * rng.random_range(0.2..0.8);
    let minor = rest - neu;
    let (pos, neg) = if positive { (dominant, minor) } else { (minor, dominant) };
    SentimentTriple::new(pos, neu, neg).expect("valid planted triple")
}

/// Prices plus news where the next-day return of day `d` follows the
/// polarity of day `d`'s planted item with probability increasing in
/// `signal_strength`.
pub fn gen_planted_signal_corpus(spec: &PlantedSignalSpec) -> Result<PlantedCorpus> {
    spec.validate()?;
    let dates = trading_days(spec.start, spec.num_days + 1);
    let vol = spec.base_volatility;
    let s = spec.signal_strength;

    let mut bars = Vec::with_capacity(dates.len());
    let mut news = Vec::with_capacity(spec.num_days);
    let mut truth = Vec::with_capacity(spec.num_days);
    let mut close = spec.start_price;
    let mut open = spec.start_price;
    // Day 0 only seeds prices and carries no news.
    for (d, date) in dates.iter().copied().enumerate() {
        let mut rng = day_rng(spec.seed, d);
        let wick_hi: f64 = rng.random_range(0.0..0.5);
        let wick_lo: f64 = rng.random_range(0.0..0.5);
        let log_volume = 15.0 + 0.2 * rng.sample::<f64, _>(StandardNormal);
        bars.push(PriceBar {
            date,
            open,
            high: open.max(close) * (1.0 + wick_hi * vol),
            low: open.min(close) * (1.0 - wick_lo * vol),
            close,
            adj_close: close,
            volume: libm::round(libm::exp(log_volume)),
        });

        let positive = rng.random_bool(0.5);
        let z: f64 = rng.sample(StandardNormal);
        let polarity = if positive { 1.0 } else { -1.0 };
        let ret = spec.drift + s * polarity * vol + 0.5 * (1.0 - s) * vol * z;
        let next_open = close;
        close *= 1.0 + ret;
        open = next_open;

        if d == 0 {
            continue;
        }
        let mood: f64 = rng.random_range(0.25..0.75);
        let slot = rng.random_range(0..=spec.noise_per_day);
        let mut items = Vec::with_capacity(spec.noise_per_day + 1);
        for i in 0..spec.noise_per_day {
            if i == slot {
                items.push(NewsItem::new(format!("P{d}"), planted_item(&mut rng, positive)));
            }
            items.push(NewsItem::new(format!("N{d}-{i}"), noise_item(&mut rng, mood)));
        }
        if slot == spec.noise_per_day {
            items.push(NewsItem::new(format!("P{d}"), planted_item(&mut rng, positive)));
        }
        truth.push(PlantedTruth {
            date,
            id: format!("P{d}"),
            positive,
        });
        news.push(DailyNews::new(date, items));
    }
    Ok(PlantedCorpus { bars, news, truth })
}
