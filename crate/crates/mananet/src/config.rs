//! Flat `key = value` files with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mananet_core::eval::{PnlMode, DEFAULT_RISK_FREE};
use mananet_core::model::{HeadKind, ModelConfig};
use mananet_core::synth::{CorpusSpec, PlantedSignalSpec, SentimentModel};
use mananet_core::train::{TrainConfig, MAX_WINDOWS};
use thiserror::Error;

use crate::io::parse_date;

/// Environment variable that replaces the seed of any loaded file.
pub const SEED_ENV: &str = "MANANET_SEED";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}: {1}")]
    Env(&'static str, String),
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Parsed entries, consumed key by key so leftovers can be reported.
#[derive(Debug, Default)]
pub struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            if map.contains_key(&key) {
                return Err(ConfigError::Duplicate { line, key });
            }
            map.insert(key, (line, value.trim().to_string()));
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.take_raw(key)
            .map(|(line, v)| {
                v.parse().map_err(|e: T::Err| ConfigError::Value {
                    line,
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.take_raw(key)
            .map(|(line, v)| {
                v.split(',')
                    .map(|p| p.trim().parse())
                    .collect::<std::result::Result<Vec<T>, _>>()
                    .map_err(|e| ConfigError::Value {
                        line,
                        key: key.to_string(),
                        message: e.to_string(),
                    })
            })
            .transpose()
    }

    fn take_date(&mut self, key: &str) -> Result<Option<mananet_core::NaiveDate>> {
        self.take_raw(key)
            .map(|(line, v)| {
                parse_date(&v).map_err(|message| ConfigError::Value {
                    line,
                    key: key.to_string(),
                    message,
                })
            })
            .transpose()
    }

    /// Errors on the first key nobody asked for.
    pub fn finish(self) -> Result<()> {
        let first = self.map.into_iter().min_by_key(|(_, (line, _))| *line);
        match first {
            Some((key, (line, _))) => Err(ConfigError::UnknownKey { line, key }),
            None => Ok(()),
        }
    }
}

fn seed(entries: &mut Entries) -> Result<u64> {
    let from_file = entries.take_or("seed", 0u64)?;
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| ConfigError::Env(SEED_ENV, e.to_string())),
        Err(_) => Ok(from_file),
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Everything `train` and `backtest` need.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub prices: Option<PathBuf>,
    pub news: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// `None` lifts the window cap.
    pub max_windows: Option<usize>,
    pub seed: u64,
}

impl RunConfig {
    /// Parses `text`; relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let seed = seed(&mut e)?;
        let d = ModelConfig::default();
        let t = TrainConfig::default();
        let path = |e: &mut Entries, k| -> Result<Option<PathBuf>> {
            Ok(e.take::<PathBuf>(k)?.map(|p| resolve(base, p)))
        };
        let prices = path(&mut e, "prices")?;
        let news = path(&mut e, "news")?;
        let truth = path(&mut e, "truth")?;
        let out_dir = resolve(base, e.take_or("out_dir", PathBuf::from("out"))?);
        let model = ModelConfig {
            d_k: e.take_or("d_k", d.d_k)?,
            d_v: e.take_or("d_v", d.d_v)?,
            d_e: e.take_or("d_e", d.d_e)?,
            hidden_width: e.take_or("hidden_width", d.hidden_width)?,
            head: e.take_or::<HeadKind>("head", d.head)?,
            identity_values: e.take_or("identity_values", d.identity_values)?,
            seed,
            ..d
        };
        let max_windows = match e.take_raw("max_windows") {
            None => Some(MAX_WINDOWS),
            Some((_, v)) if v == "none" => None,
            Some((line, v)) => Some(v.parse().map_err(|err: std::num::ParseIntError| {
                ConfigError::Value {
                    line,
                    key: "max_windows".into(),
                    message: err.to_string(),
                }
            })?),
        };
        let train = TrainConfig {
            learning_rate: e.take_or("learning_rate", t.learning_rate)?,
            momentum: e.take_or("momentum", t.momentum)?,
            clip_norm: e.take_or("clip_norm", t.clip_norm)?,
            epochs: e.take_or("epochs", t.epochs)?,
            batch_size: e.take_or("batch_size", t.batch_size)?,
            full_batch_below: e.take_or("full_batch_below", t.full_batch_below)?,
            patience: e.take_or("patience", t.patience)?,
            epsilon_grid: e.take_list("epsilon_grid")?.unwrap_or(t.epsilon_grid),
            lookback_grid: e.take_list("lookback_grid")?.unwrap_or(t.lookback_grid),
            selection_mode: e.take_or::<PnlMode>("pnl_mode", t.selection_mode)?,
            risk_free: e.take_or("risk_free", DEFAULT_RISK_FREE)?,
            allow_averaging: e.take_or("averaging_test_mode", false)?,
            seed,
        };
        e.finish()?;
        train
            .validate()
            .map_err(|err| ConfigError::Invalid(err.to_string()))?;
        ModelConfig {
            epsilon: train
                .epsilon(train.epsilon_grid[0])
                .map_err(|err| ConfigError::Invalid(err.to_string()))?,
            lookback: train.lookback_grid[0],
            ..model
        }
        .validate()
        .map_err(|err| ConfigError::Invalid(err.to_string()))?;
        Ok(Self {
            prices,
            news,
            truth,
            out_dir,
            model,
            train,
            max_windows,
            seed,
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = crate::io::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn prices(&self) -> Result<&Path> {
        self.prices.as_deref().ok_or(ConfigError::Missing("prices"))
    }

    pub fn news(&self) -> Result<&Path> {
        self.news.as_deref().ok_or(ConfigError::Missing("news"))
    }
}

pub fn parse_homogenization_spec(text: &str) -> Result<CorpusSpec> {
    let mut e = Entries::parse(text)?;
    let d = CorpusSpec::default();
    let seed = seed(&mut e)?;
    let lo = e.take_or("news_min", d.news_per_day.0)?;
    let hi = e.take_or("news_max", d.news_per_day.1)?;
    let model: String = e.take_or("sentiment", "reference".to_string())?;
    let alpha: Option<Vec<f64>> = e.take_list("alpha")?;
    let sentiment = match (model.as_str(), alpha) {
        ("reference", None) => SentimentModel::ReferenceMatched,
        ("dirichlet", Some(a)) if a.len() == 3 => SentimentModel::Dirichlet([a[0], a[1], a[2]]),
        ("dirichlet", _) => {
            return Err(ConfigError::Invalid("dirichlet needs alpha = a, b, c".into()))
        }
        ("reference", Some(_)) => {
            return Err(ConfigError::Invalid("alpha only applies to sentiment = dirichlet".into()))
        }
        (other, _) => {
            return Err(ConfigError::Invalid(format!(
                "sentiment must be reference or dirichlet, got `{other}`"
            )))
        }
    };
    let spec = CorpusSpec {
        num_days: e.take_or("num_days", d.num_days)?,
        news_per_day: (lo, hi),
        sentiment,
        seed,
        start: e.take_date("start")?.unwrap_or(d.start),
    };
    e.finish()?;
    Ok(spec)
}

pub fn parse_planted_spec(text: &str) -> Result<PlantedSignalSpec> {
    let mut e = Entries::parse(text)?;
    let d = PlantedSignalSpec::default();
    let seed = seed(&mut e)?;
    let spec = PlantedSignalSpec {
        num_days: e.take_or("num_days", d.num_days)?,
        noise_per_day: e.take_or("noise_per_day", d.noise_per_day)?,
        signal_strength: e.take_or("signal_strength", d.signal_strength)?,
        base_volatility: e.take_or("base_volatility", d.base_volatility)?,
        drift: e.take_or("drift", d.drift)?,
        seed,
        start: e.take_date("start")?.unwrap_or(d.start),
        start_price: e.take_or("start_price", d.start_price)?,
    };
    e.finish()?;
    Ok(spec)
}
