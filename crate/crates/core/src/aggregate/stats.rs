use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Descriptive statistics of one sample.
///
/// `std` is the sample standard deviation (ddof = 1, zero for a single
/// value), quantiles use linear interpolation, `skewness` is the moment
/// coefficient `m3 / m2^1.5` and `kurtosis` the excess `m4 / m2^2 - 3`.
/// A constant sample reports zero for every dispersion and shape statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub iqr: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::EmptySeries("summary statistics need at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("summary statistics need finite values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std = if values.len() > 1 {
        math::sqrt(m2 / (n - 1.0))
    } else {
        0.0
    };
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);

    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = math::quantile_sorted(&sorted, 0.5);
    let iqr = math::quantile_sorted(&sorted, 0.75) - math::quantile_sorted(&sorted, 0.25);

    let constant = sorted[0] == sorted[sorted.len() - 1];
    let (skewness, kurtosis) = if constant || m2 == 0.0 {
        (0.0, 0.0)
    } else {
        (m3 / (m2 * math::sqrt(m2)), m4 / (m2 * m2) - 3.0)
    };
    Ok(SummaryStats {
        count: values.len(),
        mean,
        std: if constant { 0.0 } else { std },
        median,
        iqr: if constant { 0.0 } else { iqr },
        skewness,
        kurtosis,
    })
}
