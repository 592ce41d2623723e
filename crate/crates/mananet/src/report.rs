//! CSV, JSON and SVG artifacts.

use std::fmt::Write as _;

use mananet_core::aggregate::{HomogenizationReport, HomogenizationSeries, Level, CHANNELS};
use mananet_core::eval::{BacktestReport, MeanReport, WeightReport};
use mananet_core::train::{Trial, TrialOutcome, TrainHistory};
use serde_json::{json, Value};

const KDE_POINTS: usize = 101;

fn stat_rows(stats: &[mananet_core::aggregate::SummaryStats; 3]) -> [(&'static str, [f64; 3]); 6] {
    let col = |f: fn(&mananet_core::aggregate::SummaryStats) -> f64| -> [f64; 3] {
        [f(&stats[0]), f(&stats[1]), f(&stats[2])]
    };
    [
        ("mean", col(|s| s.mean)),
        ("std", col(|s| s.std)),
        ("median", col(|s| s.median)),
        ("iqr", col(|s| s.iqr)),
        ("skewness", col(|s| s.skewness)),
        ("kurtosis", col(|s| s.kurtosis)),
    ]
}

/// Three levels by six statistics, one column per channel.
pub fn homogenization_table(report: &HomogenizationReport) -> String {
    let mut out = String::from("level,statistic,positive,neutral,negative\n");
    for level in Level::ALL {
        for (name, v) in stat_rows(report.level(level)) {
            writeln!(out, "{},{name},{},{},{}", level.name(), v[0], v[1], v[2]).unwrap();
        }
    }
    out
}

pub fn reduction_table(report: &HomogenizationReport) -> String {
    let mut out = String::from("channel,std_reduction,count_std_reduction\n");
    for (c, name) in CHANNELS.iter().enumerate() {
        writeln!(
            out,
            "{name},{},{}",
            report.std_reduction[c], report.count_std_reduction[c]
        )
        .unwrap();
    }
    out
}

pub fn homogenization_json(report: &HomogenizationReport) -> Value {
    let level = |l: Level| -> Value {
        let mut m = serde_json::Map::new();
        for (name, v) in stat_rows(report.level(l)) {
            m.insert(name.into(), json!({"positive": v[0], "neutral": v[1], "negative": v[2]}));
        }
        Value::Object(m)
    };
    json!({
        "days_used": report.days_used,
        "skipped_days": report.skipped_days,
        "individual": level(Level::Individual),
        "daily_average": level(Level::DailyAverage),
        "daily_count_ratio": level(Level::DailyCountRatio),
        "std_reduction": report.std_reduction,
        "count_std_reduction": report.count_std_reduction,
    })
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian kernel density on `[0, 1]` with Silverman's bandwidth.
pub fn kde(values: &[f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        return Vec::new();
    }
    let s = sorted(values);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let std = if s.len() > 1 {
        (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let h = (0.9 * spread * n.powf(-0.2)).max(1e-3);
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..KDE_POINTS)
        .map(|i| {
            let x = i as f64 / (KDE_POINTS - 1) as f64;
            let d: f64 = s.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
            (x, d * norm)
        })
        .collect()
}

pub fn homogenization_kde(series: &HomogenizationSeries) -> String {
    let mut out = String::from("level,channel,x,density\n");
    for level in Level::ALL {
        for (c, values) in series.level(level).iter().enumerate() {
            for (x, d) in kde(values) {
                writeln!(out, "{},{},{x},{d}", level.name(), CHANNELS[c]).unwrap();
            }
        }
    }
    out
}

/// Five-number summaries plus 1.5 IQR whiskers.
pub fn homogenization_boxplot(series: &HomogenizationSeries) -> String {
    let mut out =
        String::from("level,channel,min,q1,median,q3,max,whisker_low,whisker_high\n");
    for level in Level::ALL {
        for (c, values) in series.level(level).iter().enumerate() {
            if values.is_empty() {
                continue;
            }
            let s = sorted(values);
            let (q1, med, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
            let fence = 1.5 * (q3 - q1);
            let lo = s.iter().copied().find(|x| *x >= q1 - fence).unwrap_or(s[0]);
            let hi = s.iter().rev().copied().find(|x| *x <= q3 + fence).unwrap_or(s[s.len() - 1]);
            writeln!(
                out,
                "{},{},{},{q1},{med},{q3},{},{lo},{hi}",
                level.name(),
                CHANNELS[c],
                s[0],
                s[s.len() - 1]
            )
            .unwrap();
        }
    }
    out
}

pub fn backtest_days_csv(report: &BacktestReport) -> String {
    let mut out = String::from("date,pred,label,flag,return,contribution\n");
    for d in &report.days {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            d.date,
            u8::from(d.prediction),
            u8::from(d.label),
            d.flag,
            d.ret,
            d.contribution
        )
        .unwrap();
    }
    out
}

pub fn backtest_json(report: &BacktestReport) -> Value {
    json!({
        "window": report.window_index,
        "mode": report.mode.name(),
        "risk_free": report.risk_free,
        "days": report.days.len(),
        "accuracy": report.accuracy,
        "pnl": report.pnl,
        "sharpe": report.sharpe,
        "mean_loss": report.mean_loss,
    })
}

pub fn mean_json(mean: &MeanReport) -> Value {
    json!({
        "windows": mean.windows,
        "accuracy": mean.accuracy,
        "pnl": mean.pnl,
        "sharpe": mean.sharpe,
        "undefined_sharpe_windows": mean.undefined_sharpe_windows,
    })
}

pub fn history_csv(h: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_accuracy,chosen\n");
    for i in 0..h.train_loss.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            h.train_loss[i],
            h.val_loss[i],
            h.val_accuracy[i],
            u8::from(i + 1 == h.chosen_epoch)
        )
        .unwrap();
    }
    out
}

fn metrics_json(r: &BacktestReport) -> Value {
    json!({"accuracy": r.accuracy, "pnl": r.pnl, "sharpe": r.sharpe, "loss": r.mean_loss})
}

/// One JSON object per trial, without timing so reruns are byte-identical.
pub fn trial_json(trial: &Trial, chosen: bool) -> Value {
    let mut v = json!({
        "window": trial.window_index,
        "epsilon": trial.epsilon,
        "lookback": trial.lookback,
        "seed": trial.seed,
        "chosen": chosen,
    });
    let m = v.as_object_mut().expect("object");
    match &trial.outcome {
        TrialOutcome::Trained { model, metrics } => {
            m.insert("status".into(), json!("trained"));
            m.insert("chosen_epoch".into(), json!(model.history.chosen_epoch));
            m.insert("val".into(), metrics_json(&metrics.val));
            m.insert("test".into(), metrics_json(&metrics.test));
        }
        TrialOutcome::Diverged { step } => {
            m.insert("status".into(), json!("diverged"));
            m.insert("step".into(), json!(step));
        }
    }
    v
}

pub fn weights_csv(report: &WeightReport) -> String {
    let mut out = String::from("date,id,raw,normalized,rank,day_size\n");
    for w in &report.weights {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            w.date, w.id, w.raw, w.normalized, w.rank, w.day_size
        )
        .unwrap();
    }
    out
}

pub fn weight_json(report: &WeightReport, planted: Option<(f64, f64, usize)>) -> Value {
    let percentiles: serde_json::Map<String, Value> = report
        .percentiles
        .iter()
        .map(|(p, v)| (format!("p{p}"), json!(v)))
        .collect();
    let mut v = json!({
        "items": report.weights.len(),
        "days_used": report.days_used,
        "degenerate_days": report.degenerate_days,
        "skipped_days": report.skipped_days,
        "percentiles": percentiles,
        "fraction_above_0.98": report.fraction_above_098,
        "fraction_below_0.5": report.fraction_below_05,
    });
    if let Some((mean, rank, n)) = planted {
        v.as_object_mut().expect("object").insert(
            "planted".into(),
            json!({"items": n, "mean_normalized_weight": mean, "mean_rank": rank}),
        );
    }
    v
}

pub fn weight_kde_csv(report: &WeightReport) -> String {
    let values: Vec<f64> = report.weights.iter().map(|w| w.normalized).collect();
    let mut out = String::from("x,density\n");
    for (x, d) in kde(&values) {
        writeln!(out, "{x},{d}").unwrap();
    }
    out
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#7f7f7f"];

/// Minimal multi-series line chart.
pub fn line_svg(title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let points = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        w / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        w / 2.0,
        h - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{pad}" y="{}" font-size="11">{y0:.4}</text><text x="{pad}" y="{}" font-size="11">{y1:.4}</text>"#,
        h - pad + 14.0,
        pad - 6.0
    )
    .unwrap();
    for (i, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            w - pad - 120.0,
            pad + 16.0 * (i as f64 + 1.0),
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Cumulative contribution by day index.
pub fn cumulative_pnl(report: &BacktestReport) -> Vec<(f64, f64)> {
    let mut acc = 0.0;
    report
        .days
        .iter()
        .enumerate()
        .map(|(i, d)| {
            acc += d.contribution;
            (i as f64, acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kde_integrates_to_about_one() {
        let values: Vec<f64> = (0..200).map(|i| 0.3 + 0.4 * (i as f64 / 199.0)).collect();
        let k = kde(&values);
        assert_eq!(k.len(), KDE_POINTS);
        let area: f64 = k.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
        assert!((area - 1.0).abs() < 0.02, "{area}");
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = line_svg("a < b", "day", &[("x".into(), vec![(0.0, 1.0), (1.0, 2.0)])]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(line_svg("empty", "x", &[]).contains("</svg>"));
    }
}
