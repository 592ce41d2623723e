//! Price CSV, news JSONL and planted ground-truth files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mananet_core::dataset::{DailyNews, NewsItem, PriceBar, SentimentTriple};
use mananet_core::synth::PlantedTruth;
use mananet_core::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PRICE_HEADER: [&str; 7] = ["date", "open", "high", "low", "close", "adj_close", "volume"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: u64, message: impl ToString) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FormatError>;

pub fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FormatError::io(path, e))
}

#[derive(Deserialize)]
struct PriceRow {
    date: String,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    adj_close: f64,
    volume: f64,
}

/// Loads, validates and sorts daily bars.
pub fn load_prices(path: &Path) -> Result<Vec<PriceBar>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => FormatError::io(path, io),
            other => FormatError::parse(path, 1, format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(|e| FormatError::parse(path, 1, e))?
        .clone();
    if header.iter().ne(PRICE_HEADER) {
        return Err(FormatError::parse(
            path,
            1,
            format!("expected header `{}`", PRICE_HEADER.join(",")),
        ));
    }
    let mut bars = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            FormatError::parse(path, line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: PriceRow = rec
            .deserialize(Some(&header))
            .map_err(|e| FormatError::parse(path, line, e))?;
        let date = parse_date(&row.date).map_err(|m| FormatError::parse(path, line, m))?;
        let bar = PriceBar {
            date,
            open: row.open,
            high: row.high,
            low: row.low,
            close: row.close,
            adj_close: row.adj_close,
            volume: row.volume,
        };
        bar.validate().map_err(|e| FormatError::parse(path, line, e))?;
        bars.push(bar);
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(FormatError::Invalid {
            path: path.to_path_buf(),
            message: format!("duplicate date {}", w[0].date),
        });
    }
    Ok(bars)
}

pub fn write_prices(path: &Path, bars: &[PriceBar]) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::new();
    body.push_str(&PRICE_HEADER.join(","));
    body.push('\n');
    for b in bars {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.date, b.open, b.high, b.low, b.close, b.adj_close, b.volume
        ));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| FormatError::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct NewsLine {
    date: String,
    id: String,
    pos: f64,
    neu: f64,
    neg: f64,
}

/// Loads line-delimited news, grouped by date in file order.
pub fn load_news(path: &Path) -> Result<Vec<DailyNews>> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut days: BTreeMap<NaiveDate, Vec<NewsItem>> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NewsLine =
            serde_json::from_str(&line).map_err(|e| FormatError::parse(path, line_no, e))?;
        let date = parse_date(&rec.date).map_err(|m| FormatError::parse(path, line_no, m))?;
        let sentiment = SentimentTriple::new(rec.pos, rec.neu, rec.neg)
            .map_err(|e| FormatError::parse(path, line_no, e))?;
        days.entry(date)
            .or_default()
            .push(NewsItem::new(rec.id, sentiment));
    }
    Ok(days
        .into_iter()
        .map(|(date, items)| DailyNews::new(date, items))
        .collect())
}

/// Writes one line per item; days without items leave no trace.
pub fn write_news(path: &Path, days: &[DailyNews]) -> Result<()> {
    let mut w = create(path)?;
    for day in days {
        for item in &day.items {
            let line = NewsLine {
                date: day.date.to_string(),
                id: item.id.clone(),
                pos: item.sentiment.pos(),
                neu: item.sentiment.neu(),
                neg: item.sentiment.neg(),
            };
            let json = serde_json::to_string(&line).expect("plain record serializes");
            writeln!(w, "{json}").map_err(|e| FormatError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

pub fn write_truth(path: &Path, truth: &[PlantedTruth]) -> Result<()> {
    let mut body = String::from("date,id,polarity\n");
    for t in truth {
        let polarity = if t.positive { "positive" } else { "negative" };
        body.push_str(&format!("{},{},{}\n", t.date, t.id, polarity));
    }
    let mut w = create(path)?;
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| FormatError::io(path, e))
}

pub fn load_truth(path: &Path) -> Result<Vec<PlantedTruth>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FormatError::parse(path, 0, e))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| FormatError::parse(path, line, e))?;
        if rec.len() != 3 {
            return Err(FormatError::parse(path, line, "expected date,id,polarity"));
        }
        let positive = match &rec[2] {
            "positive" => true,
            "negative" => false,
            other => return Err(FormatError::parse(path, line, format!("bad polarity `{other}`"))),
        };
        out.push(PlantedTruth {
            date: parse_date(&rec[0]).map_err(|m| FormatError::parse(path, line, m))?,
            id: rec[1].to_string(),
            positive,
        });
    }
    Ok(out)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| FormatError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}
