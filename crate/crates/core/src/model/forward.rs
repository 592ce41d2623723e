use alloc::format;
use alloc::vec::Vec;

use super::{HeadKind, ModelParams, NewsEncoder, Slot};
use crate::aggregate::{aggregation_weights, attention_features, attention_scores, AttentionOutput};
use crate::dataset::{DailyNews, DayRecord, PriceFeatureVector};
use crate::error::{Error, Result};
use crate::math;

/// Anything that carries one day's price features and news.
pub trait DayInput {
    fn features(&self) -> &PriceFeatureVector;
    fn news(&self) -> &DailyNews;
}

impl DayInput for DayRecord {
    fn features(&self) -> &PriceFeatureVector {
        &self.features
    }

    fn news(&self) -> &DailyNews {
        &self.news
    }
}

impl DayInput for (PriceFeatureVector, DailyNews) {
    fn features(&self) -> &PriceFeatureVector {
        &self.0
    }

    fn news(&self) -> &DailyNews {
        &self.1
    }
}

impl DayInput for (&PriceFeatureVector, &DailyNews) {
    fn features(&self) -> &PriceFeatureVector {
        self.0
    }

    fn news(&self) -> &DailyNews {
        self.1
    }
}

impl<T: DayInput> DayInput for &T {
    fn features(&self) -> &PriceFeatureVector {
        (*self).features()
    }

    fn news(&self) -> &DailyNews {
        (*self).news()
    }
}

/// Intermediates of one day kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTrace {
    pub price: [f64; 6],
    pub sentiments: Vec<[f64; 3]>,
    pub query: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    /// Empty scores and weights on a news-free day or for static encoders.
    pub attention: AttentionOutput,
    /// `m_d = [e(p_d), news representation]`.
    pub m: Vec<f64>,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub days: Vec<DayTrace>,
    pub input: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: [f64; 2],
    pub label: Option<bool>,
    pub loss: Option<f64>,
    pub(crate) revision: u64,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> [f64; 2] {
        probabilities(self.logits)
    }

    /// `true` when the "increase" logit is strictly larger.
    pub fn predicts_increase(&self) -> bool {
        self.logits[1] > self.logits[0]
    }
}

/// Softmax of two logits.
pub fn probabilities(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = math::exp(logits[0] - m);
    let e1 = math::exp(logits[1] - m);
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Softmax cross-entropy `-ln p(label)`; index 1 is "increase".
pub fn loss(logits: [f64; 2], label: bool) -> f64 {
    let (hi, lo) = if logits[0] >= logits[1] {
        (logits[0], logits[1])
    } else {
        (logits[1], logits[0])
    };
    let lse = hi + math::ln_1p(math::exp(lo - hi));
    lse - logits[usize::from(label)]
}

fn check_finite(day: &impl DayInput) -> Result<()> {
    if day.features().0.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("non-finite price feature"));
    }
    Ok(())
}

pub(crate) fn trace_day(params: &ModelParams, day: &impl DayInput) -> Result<DayTrace> {
    check_finite(day)?;
    let cfg = params.config();
    let price = day.features().0;
    let news = day.news();
    let embed = params.get(Slot::We).affine(&price, params.get(Slot::Be));
    let sentiments: Vec<[f64; 3]> = news.sentiments().map(|s| s.as_array()).collect();

    let mut trace = DayTrace {
        price,
        sentiments,
        query: Vec::new(),
        keys: Vec::new(),
        values: Vec::new(),
        attention: AttentionOutput::default(),
        m: Vec::with_capacity(cfg.day_dim()),
        used_fallback: false,
    };
    let representation = match cfg.news {
        _ if news.is_empty() => {
            trace.used_fallback = true;
            params.get(Slot::NoNews).data.clone()
        }
        NewsEncoder::Static(agg) => agg.represent(news)?,
        NewsEncoder::Attention => {
            trace.query = params.get(Slot::Wq).affine(&price, params.get(Slot::Bq));
            let wk = params.get(Slot::Wk);
            let (wv, bv) = (params.get(Slot::Wv), params.get(Slot::Bv));
            trace.keys = trace.sentiments.iter().map(|s| wk.linear(s)).collect();
            trace.values = trace.sentiments.iter().map(|s| wv.affine(s, bv)).collect();
            let scores = attention_scores(&trace.query, &trace.keys)?;
            let weights = aggregation_weights(&scores, cfg.epsilon.get())?;
            let attf = attention_features(&weights, &trace.values)?;
            trace.attention = AttentionOutput {
                scores,
                weights,
                attf: attf.clone(),
            };
            attf
        }
    };
    trace.m.extend_from_slice(&embed);
    trace.m.extend_from_slice(&representation);
    Ok(trace)
}

/// `m_d` and the attention output of a single day.
pub fn forward_day(
    params: &ModelParams,
    features: &PriceFeatureVector,
    news: &DailyNews,
) -> Result<(Vec<f64>, AttentionOutput)> {
    let trace = trace_day(params, &(features, news))?;
    let mut attention = trace.attention;
    if trace.used_fallback {
        attention.attf = trace.m[params.config().d_e..].to_vec();
    }
    Ok((trace.m, attention))
}

/// Runs the model on `t` chronologically ordered days. When `label` is given
/// the trace also carries the cross-entropy loss.
pub fn forward_window<D: DayInput>(
    params: &ModelParams,
    days: &[D],
    label: Option<bool>,
) -> Result<ForwardTrace> {
    let cfg = params.config();
    if days.len() != cfg.lookback {
        return Err(Error::validation(format!(
            "window has {} days, model lookback is {}",
            days.len(),
            cfg.lookback
        )));
    }
    let days = days
        .iter()
        .map(|d| trace_day(params, d))
        .collect::<Result<Vec<_>>>()?;
    let input: Vec<f64> = days.iter().flat_map(|d| d.m.iter().copied()).collect();
    let (pre_hidden, hidden, logits) = match cfg.head {
        HeadKind::Mlp => {
            let pre = params.get(Slot::W1).affine(&input, params.get(Slot::B1));
            let hidden: Vec<f64> = pre.iter().map(|&z| math::softplus(z)).collect();
            let z = params.get(Slot::W2).affine(&hidden, params.get(Slot::B2));
            (pre, hidden, z)
        }
        HeadKind::Shallow => {
            let z = params.get(Slot::W2).affine(&input, params.get(Slot::B2));
            (Vec::new(), Vec::new(), z)
        }
    };
    let logits = [logits[0], logits[1]];
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::validation("non-finite logits"));
    }
    Ok(ForwardTrace {
        days,
        input,
        pre_hidden,
        hidden,
        logits,
        label,
        loss: label.map(|y| loss(logits, y)),
        revision: params.revision(),
    })
}
