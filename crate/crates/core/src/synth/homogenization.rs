use alloc::format;
use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{day_rng, default_start, trading_days};
use crate::aggregate::CHANNELS;
use crate::dataset::{DailyNews, NewsItem, SentimentTriple};
use crate::error::{Error, Result};
use crate::math;

/// Individual-item means of the reference corpus (positive, neutral, negative).
pub const REFERENCE_MEANS: [f64; 3] = [0.360, 0.343, 0.297];
/// Individual-item standard deviations of the reference corpus.
pub const REFERENCE_STDS: [f64; 3] = [0.268, 0.248, 0.295];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SentimentModel {
    /// Dirichlet draws with the given concentration triple.
    Dirichlet([f64; 3]),
    /// Dirichlet whose mean equals [`REFERENCE_MEANS`] and whose concentration
    /// is fitted to [`REFERENCE_STDS`] by least squares.
    ReferenceMatched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub num_days: usize,
    /// Inclusive range of items per day, drawn uniformly.
    pub news_per_day: (usize, usize),
    pub sentiment: SentimentModel,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_days: 250,
            news_per_day: (200, 200),
            sentiment: SentimentModel::ReferenceMatched,
            seed: 0,
            start: default_start(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMoments {
    pub mean: f64,
    pub std: f64,
}

/// Target versus achieved individual-item moments of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub alpha: [f64; 3],
    pub target: Option<[ChannelMoments; 3]>,
    pub achieved: [ChannelMoments; 3],
    pub items: usize,
}

/// Concentration triple for a Dirichlet with the given channel means and
/// (least-squares) channel standard deviations.
fn fit_alpha(means: [f64; 3], stds: [f64; 3]) -> Result<[f64; 3]> {
    // Dirichlet: var_j = m_j (1 - m_j) / (c + 1); fit u = 1/sqrt(c + 1).
    let spread: [f64; 3] = core::array::from_fn(|j| math::sqrt(means[j] * (1.0 - means[j])));
    for j in 0..3 {
        if stds[j] >= spread[j] {
            return Err(Error::Generation(format!(
                "{} channel: std {} is infeasible for mean {} (must be < {})",
                CHANNELS[j], stds[j], means[j], spread[j]
            )));
        }
    }
    let num: f64 = (0..3).map(|j| spread[j] * stds[j]).sum();
    let den: f64 = spread.iter().map(|a| a * a).sum();
    let u = num / den;
    let concentration = 1.0 / (u * u) - 1.0;
    if concentration <= 0.0 {
        return Err(Error::Generation("fitted concentration is not positive".into()));
    }
    Ok(means.map(|m| m * concentration))
}

fn dirichlet_triple(gammas: &[Gamma<f64>; 3], rng: &mut impl Rng) -> SentimentTriple {
    loop {
        let g: [f64; 3] = core::array::from_fn(|j| gammas[j].sample(rng));
        let total = g[0] + g[1] + g[2];
        if total > 0.0 && total.is_finite() {
            let pos = g[0] / total;
            let neu = g[1] / total;
            if let Ok(t) = SentimentTriple::from_pos_neu(pos, neu) {
                return t;
            }
        }
    }
}

/// Corpus of iid-per-day items for homogenization experiments.
pub fn gen_homogenization_corpus(spec: &CorpusSpec) -> Result<(Vec<DailyNews>, GenerationReport)> {
    let (lo, hi) = spec.news_per_day;
    if lo > hi {
        return Err(Error::Generation("news_per_day min exceeds max".into()));
    }
    let (alpha, target) = match spec.sentiment {
        SentimentModel::Dirichlet(alpha) => {
            if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                return Err(Error::Generation("dirichlet concentrations must be > 0".into()));
            }
            (alpha, None)
        }
        SentimentModel::ReferenceMatched => (
            fit_alpha(REFERENCE_MEANS, REFERENCE_STDS)?,
            Some(core::array::from_fn(|j| ChannelMoments {
                mean: REFERENCE_MEANS[j],
                std: REFERENCE_STDS[j],
            })),
        ),
    };
    let gammas: [Gamma<f64>; 3] = core::array::from_fn(|j| {
        Gamma::new(alpha[j], 1.0).expect("positive shape")
    });

    let dates = trading_days(spec.start, spec.num_days);
    let mut corpus = Vec::with_capacity(spec.num_days);
    let (mut sum, mut sum_sq, mut items) = ([0.0; 3], [0.0; 3], 0usize);
    for (d, date) in dates.into_iter().enumerate() {
        let mut rng = day_rng(spec.seed, d);
        let n = rng.random_range(lo..=hi);
        let day_items: Vec<NewsItem> = (0..n)
            .map(|i| {
                let s = dirichlet_triple(&gammas, &mut rng);
                for (j, x) in s.as_array().into_iter().enumerate() {
                    sum[j] += x;
                    sum_sq[j] += x * x;
                }
                NewsItem::new(format!("d{d}-{i}"), s)
            })
            .collect();
        items += n;
        corpus.push(DailyNews::new(date, day_items));
    }
    let achieved = core::array::from_fn(|j| {
        let n = items as f64;
        let mean = if items > 0 { sum[j] / n } else { 0.0 };
        let var = if items > 1 {
            (sum_sq[j] - n * mean * mean) / (n - 1.0)
        } else {
            0.0
        };
        ChannelMoments {
            mean,
            std: math::sqrt(var.max(0.0)),
        }
    });
    Ok((
        corpus,
        GenerationReport {
            alpha,
            target,
            achieved,
            items,
        },
    ))
}
