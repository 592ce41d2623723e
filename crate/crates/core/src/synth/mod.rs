//! Deterministic synthetic corpora.
//!
//! Every generator is a pure function of its spec. Each trading day draws
//! from its own ChaCha stream derived from `(seed, day index)`.

mod homogenization;
mod planted;

pub use homogenization::{
    gen_homogenization_corpus, ChannelMoments, CorpusSpec, GenerationReport, SentimentModel,
    REFERENCE_MEANS, REFERENCE_STDS,
};
pub use planted::{gen_planted_signal_corpus, PlantedCorpus, PlantedSignalSpec, PlantedTruth};

use alloc::vec::Vec;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` consecutive weekdays starting at `start` (or the next weekday).
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub(crate) fn day_rng(seed: u64, day: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(day as u64 + 1);
    rng
}

pub(crate) fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2003, 1, 2).expect("valid date")
}
