//! Static equal-weight aggregators used as baselines.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::{DailyNews, SentimentTriple};
use crate::error::{Error, Result};

/// News category by argmax of the triple; any tie goes to neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub fn of(s: &SentimentTriple) -> Self {
        let (p, u, n) = (s.pos(), s.neu(), s.neg());
        if p > u && p > n {
            Polarity::Positive
        } else if n > p && n > u {
            Polarity::Negative
        } else {
            Polarity::Neutral
        }
    }
}

fn counts(day: &DailyNews) -> [usize; 3] {
    let mut c = [0; 3];
    for s in day.sentiments() {
        match Polarity::of(s) {
            Polarity::Positive => c[0] += 1,
            Polarity::Neutral => c[1] += 1,
            Polarity::Negative => c[2] += 1,
        }
    }
    c
}

/// Count Features: category counts divided by `N_d`.
pub fn aggregate_cf(day: &DailyNews) -> Result<[f64; 3]> {
    if day.is_empty() {
        return Err(Error::EmptyDay);
    }
    let n = day.len() as f64;
    let c = counts(day);
    Ok([c[0] as f64 / n, c[1] as f64 / n, c[2] as f64 / n])
}

/// Sentiment factor of a day. `degenerate` is set when no item is polar, in
/// which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenF {
    pub value: f64,
    pub degenerate: bool,
}

/// `(num_pos - num_neg) / (num_pos + num_neg)`.
pub fn aggregate_senf(day: &DailyNews) -> SenF {
    let c = counts(day);
    let polar = c[0] + c[2];
    if polar == 0 {
        return SenF {
            value: 0.0,
            degenerate: true,
        };
    }
    SenF {
        value: (c[0] as f64 - c[2] as f64) / polar as f64,
        degenerate: false,
    }
}

/// Componentwise sum of the day's triples.
pub fn aggregate_sumf(day: &DailyNews) -> Result<[f64; 3]> {
    if day.is_empty() {
        return Err(Error::EmptyDay);
    }
    let mut acc = [0.0; 3];
    for s in day.sentiments() {
        for (a, x) in acc.iter_mut().zip(s.as_array()) {
            *a += x;
        }
    }
    Ok(acc)
}

/// Componentwise mean of the day's triples.
pub fn aggregate_af(day: &DailyNews) -> Result<[f64; 3]> {
    let sum = aggregate_sumf(day)?;
    let n = day.len() as f64;
    Ok(sum.map(|x| x / n))
}

/// Frequency-weighted mean over distinct news ids; an id's frequency is the
/// number of items sharing it, and its triple is the one first seen.
pub fn aggregate_faf(day: &DailyNews) -> Result<[f64; 3]> {
    if day.is_empty() {
        return Err(Error::EmptyDay);
    }
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut distinct: Vec<(SentimentTriple, usize)> = Vec::new();
    for item in &day.items {
        match index.get(item.id.as_str()) {
            Some(&i) => distinct[i].1 += 1,
            None => {
                index.insert(item.id.as_str(), distinct.len());
                distinct.push((item.sentiment, 1));
            }
        }
    }
    let total: usize = distinct.iter().map(|(_, f)| f).sum();
    let mut acc = [0.0; 3];
    for (s, freq) in &distinct {
        let f = *freq as f64;
        for (a, x) in acc.iter_mut().zip(s.as_array()) {
            *a += f * x;
        }
    }
    let total = total as f64;
    Ok(acc.map(|x| x / total))
}

/// A static (non-trainable) daily news representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StaticAggregator {
    Cf,
    Senf,
    Sumf,
    Af,
    Faf,
    /// No news representation at all.
    PriceOnly,
}

impl StaticAggregator {
    pub const ALL: [StaticAggregator; 6] = [
        StaticAggregator::Cf,
        StaticAggregator::Senf,
        StaticAggregator::Sumf,
        StaticAggregator::Af,
        StaticAggregator::Faf,
        StaticAggregator::PriceOnly,
    ];

    pub fn dim(self) -> usize {
        match self {
            StaticAggregator::Senf => 1,
            StaticAggregator::PriceOnly => 0,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StaticAggregator::Cf => "cf",
            StaticAggregator::Senf => "senf",
            StaticAggregator::Sumf => "sumf",
            StaticAggregator::Af => "af",
            StaticAggregator::Faf => "faf",
            StaticAggregator::PriceOnly => "price-only",
        }
    }

    /// Representation of a non-empty day.
    pub fn represent(self, day: &DailyNews) -> Result<Vec<f64>> {
        Ok(match self {
            StaticAggregator::Cf => aggregate_cf(day)?.to_vec(),
            StaticAggregator::Senf => vec![aggregate_senf(day).value],
            StaticAggregator::Sumf => aggregate_sumf(day)?.to_vec(),
            StaticAggregator::Af => aggregate_af(day)?.to_vec(),
            StaticAggregator::Faf => aggregate_faf(day)?.to_vec(),
            StaticAggregator::PriceOnly => Vec::new(),
        })
    }
}

impl fmt::Display for StaticAggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StaticAggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StaticAggregator::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::validation(alloc::format!("unknown aggregator `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NewsItem;
    use chrono::NaiveDate;

    fn day_of(items: &[(&str, [f64; 3])]) -> DailyNews {
        DailyNews::new(
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            items
                .iter()
                .map(|(id, s)| NewsItem::new(*id, SentimentTriple::new(s[0], s[1], s[2]).unwrap()))
                .collect(),
        )
    }

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn cf_examples() {
        let d = day_of(&[
            ("a", [0.8, 0.1, 0.1]),
            ("b", [0.2, 0.7, 0.1]),
            ("c", [0.1, 0.2, 0.7]),
            ("d", [0.6, 0.3, 0.1]),
        ]);
        assert_eq!(aggregate_cf(&d).unwrap(), [0.5, 0.25, 0.25]);
        let d = day_of(&[("a", [0.9, 0.05, 0.05]), ("b", [0.9, 0.05, 0.05])]);
        assert_eq!(aggregate_cf(&d).unwrap(), [1.0, 0.0, 0.0]);
        let third = 1.0 / 3.0;
        let d = day_of(&[("a", [third, third, third])]);
        assert_eq!(aggregate_cf(&d).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(aggregate_cf(&day_of(&[])), Err(Error::EmptyDay));
    }

    #[test]
    fn senf_examples() {
        let d = day_of(&[
            ("a", [0.8, 0.1, 0.1]),
            ("b", [0.7, 0.2, 0.1]),
            ("c", [0.1, 0.2, 0.7]),
            ("d", [0.1, 0.8, 0.1]),
        ]);
        assert!((aggregate_senf(&d).value - 1.0 / 3.0).abs() < 1e-15);
        let d = day_of(&[("a", [0.8, 0.1, 0.1])]);
        assert_eq!(aggregate_senf(&d).value, 1.0);
        let d = day_of(&[("a", [0.8, 0.1, 0.1]), ("b", [0.1, 0.1, 0.8])]);
        assert_eq!(aggregate_senf(&d).value, 0.0);
        let s = aggregate_senf(&day_of(&[("a", [0.1, 0.8, 0.1])]));
        assert_eq!(s, SenF { value: 0.0, degenerate: true });
    }

    #[test]
    fn sum_and_average_examples() {
        let d = day_of(&[("a", [0.5, 0.3, 0.2]), ("b", [0.1, 0.6, 0.3])]);
        assert!(close(aggregate_sumf(&d).unwrap(), [0.6, 0.9, 0.5]));
        assert!(close(aggregate_af(&d).unwrap(), [0.3, 0.45, 0.25]));
        let d = day_of(&[("a", [1.0, 0.0, 0.0]), ("b", [0.0, 0.0, 1.0])]);
        assert_eq!(aggregate_af(&d).unwrap(), [0.5, 0.0, 0.5]);
        let one = day_of(&[("a", [0.2, 0.3, 0.5])]);
        assert_eq!(aggregate_sumf(&one).unwrap(), [0.2, 0.3, 0.5]);
        assert_eq!(aggregate_af(&one).unwrap(), [0.2, 0.3, 0.5]);
        let k = day_of(&[("a", [0.25, 0.25, 0.5]); 4]);
        assert_eq!(aggregate_sumf(&k).unwrap(), [1.0, 1.0, 2.0]);
    }

    #[test]
    fn faf_examples() {
        let d = day_of(&[("A", [1.0, 0.0, 0.0]), ("A", [1.0, 0.0, 0.0]), ("B", [0.0, 0.0, 1.0])]);
        assert!(close(aggregate_faf(&d).unwrap(), [2.0 / 3.0, 0.0, 1.0 / 3.0]));
        let d = day_of(&[("A", [0.2, 0.5, 0.3]); 5]);
        assert!(close(aggregate_faf(&d).unwrap(), [0.2, 0.5, 0.3]));
        let d = day_of(&[("a", [0.5, 0.3, 0.2]), ("b", [0.1, 0.6, 0.3]), ("c", [0.3, 0.3, 0.4])]);
        assert_eq!(aggregate_faf(&d).unwrap(), aggregate_af(&d).unwrap());
    }

    #[test]
    fn aggregator_names_round_trip() {
        for a in StaticAggregator::ALL {
            assert_eq!(a.name().parse::<StaticAggregator>().unwrap(), a);
        }
        assert!("mana".parse::<StaticAggregator>().is_err());
    }
}
