//! Text checkpoints of trained models. Floats are written in shortest
//! round-trip form, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use mananet_core::aggregate::Epsilon;
use mananet_core::dataset::{FeatureStats, Moments};
use mananet_core::model::{HeadKind, ModelConfig, ModelParams, NewsEncoder, ParamSet, Slot, Tensor};
use mananet_core::train::{TrainHistory, TrainedModel, WindowSplit};

use crate::config::Entries;

const MAGIC: &str = "# mananet checkpoint v1";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn range(r: &std::ops::Range<usize>) -> String {
    format!("{}..{}", r.start, r.end)
}

pub fn encoder_name(news: NewsEncoder) -> &'static str {
    match news {
        NewsEncoder::Attention => "mana",
        NewsEncoder::Static(agg) => agg.name(),
    }
}

pub fn parse_encoder(s: &str) -> anyhow::Result<NewsEncoder> {
    match s {
        "mana" => Ok(NewsEncoder::Attention),
        other => Ok(NewsEncoder::Static(other.parse()?)),
    }
}

pub fn to_string(model: &TrainedModel) -> String {
    let cfg = model.params.config();
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        writeln!(out, "{k} = {v}").expect("string write");
    };
    line("window", model.split.window_index.to_string());
    line("train", range(&model.split.train));
    line("val", range(&model.split.val));
    line("test", range(&model.split.test));
    line("d_k", cfg.d_k.to_string());
    line("d_v", cfg.d_v.to_string());
    line("d_e", cfg.d_e.to_string());
    line("hidden_width", cfg.hidden_width.to_string());
    line("lookback", cfg.lookback.to_string());
    line("epsilon", cfg.epsilon.get().to_string());
    line("seed", cfg.seed.to_string());
    line("head", cfg.head.name().to_string());
    line("news", encoder_name(cfg.news).to_string());
    line("identity_values", cfg.identity_values.to_string());
    let s = &model.stats;
    line("stats.log_volume", join(&[s.log_volume.mean, s.log_volume.std]));
    line("stats.close", join(&[s.close.mean, s.close.std]));
    let h = &model.history;
    line("history.chosen_epoch", h.chosen_epoch.to_string());
    line("history.train_loss", join(&h.train_loss));
    line("history.val_loss", join(&h.val_loss));
    line("history.val_accuracy", join(&h.val_accuracy));
    for (slot, t) in model.params.tensors().iter() {
        let mut v = format!("{} {}", t.rows, t.cols);
        if !t.data.is_empty() {
            v.push(' ');
            v.push_str(&join(&t.data));
        }
        line(&format!("tensor.{}", slot.name()), v);
    }
    format!("{MAGIC}\n{out}")
}

fn floats(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split_whitespace()
        .map(|x| x.parse::<f64>().with_context(|| format!("bad number `{x}`")))
        .collect()
}

fn parse_range(s: &str) -> anyhow::Result<std::ops::Range<usize>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("bad range `{s}`"))?;
    Ok(a.trim().parse()?..b.trim().parse()?)
}

fn moments(s: &str) -> anyhow::Result<Moments> {
    match floats(s)?.as_slice() {
        [mean, std] => Ok(Moments {
            mean: *mean,
            std: *std,
        }),
        _ => bail!("expected `mean std`"),
    }
}

// Only averaging test runs write 0.
fn parse_epsilon(v: f64) -> anyhow::Result<Epsilon> {
    if v == 0.0 {
        return Ok(Epsilon::averaging());
    }
    Ok(Epsilon::new(v)?)
}

pub fn from_str(text: &str) -> anyhow::Result<TrainedModel> {
    if text.lines().next() != Some(MAGIC) {
        bail!("not a mananet checkpoint");
    }
    let mut e = Entries::parse(text)?;
    let mut req = |k: &'static str| -> anyhow::Result<String> {
        e.take::<String>(k)?
            .ok_or_else(|| anyhow!("checkpoint lacks `{k}`"))
    };
    let split = WindowSplit {
        window_index: req("window")?.parse()?,
        train: parse_range(&req("train")?)?,
        val: parse_range(&req("val")?)?,
        test: parse_range(&req("test")?)?,
    };
    let config = ModelConfig {
        d_k: req("d_k")?.parse()?,
        d_v: req("d_v")?.parse()?,
        d_e: req("d_e")?.parse()?,
        hidden_width: req("hidden_width")?.parse()?,
        lookback: req("lookback")?.parse()?,
        epsilon: parse_epsilon(req("epsilon")?.parse()?)?,
        seed: req("seed")?.parse()?,
        head: req("head")?.parse::<HeadKind>()?,
        news: parse_encoder(&req("news")?)?,
        identity_values: req("identity_values")?.parse()?,
    };
    let stats = FeatureStats {
        log_volume: moments(&req("stats.log_volume")?)?,
        close: moments(&req("stats.close")?)?,
    };
    let history = TrainHistory {
        chosen_epoch: req("history.chosen_epoch")?.parse()?,
        train_loss: floats(&req("history.train_loss")?)?,
        val_loss: floats(&req("history.val_loss")?)?,
        val_accuracy: floats(&req("history.val_accuracy")?)?,
    };
    let mut set = ParamSet::zeros(&config);
    for slot in Slot::ALL {
        let key = format!("tensor.{}", slot.name());
        let raw = e
            .take::<String>(&key)?
            .ok_or_else(|| anyhow!("checkpoint lacks `{key}`"))?;
        let mut parts = raw.split_whitespace();
        let rows: usize = parts.next().ok_or_else(|| anyhow!("{key}: no shape"))?.parse()?;
        let cols: usize = parts.next().ok_or_else(|| anyhow!("{key}: no shape"))?.parse()?;
        let data = parts
            .map(|x| x.parse::<f64>().with_context(|| format!("{key}: bad number `{x}`")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        set[slot] = Tensor::from_data(rows, cols, data).with_context(|| key.clone())?;
    }
    e.finish()?;
    let params = ModelParams::from_parts(config, set)
        .context("checkpoint tensors do not match its model configuration")?;
    Ok(TrainedModel {
        params,
        stats,
        history,
        split,
    })
}

pub fn save(path: &Path, model: &TrainedModel) -> anyhow::Result<()> {
    crate::io::write_text(path, &to_string(model))?;
    Ok(())
}

pub fn load(path: &Path) -> anyhow::Result<TrainedModel> {
    let text = crate::io::read_text(path)?;
    from_str(&text).with_context(|| format!("{}", path.display()))
}

/// File name of window `k`'s checkpoint.
pub fn file_name(window: usize) -> String {
    format!("window-{window:02}.ckpt")
}
