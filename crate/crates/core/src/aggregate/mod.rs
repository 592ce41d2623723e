//! News aggregation: market-news attention, equal-weight baselines and the
//! homogenization diagnostics.

mod attention;
mod baseline;
mod homogenization;
mod stats;

pub use attention::{
    aggregation_weights, attend, attention_features, attention_scores, AttentionConfig,
    AttentionOutput, Epsilon,
};
pub use baseline::{
    aggregate_af, aggregate_cf, aggregate_faf, aggregate_senf, aggregate_sumf, Polarity, SenF,
    StaticAggregator,
};
pub use homogenization::{
    homogenization_report, homogenization_series, report_from_series, HomogenizationReport,
    HomogenizationSeries, Level, CHANNELS,
};
pub use stats::{summary_stats, SummaryStats};
