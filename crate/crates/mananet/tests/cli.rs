use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mananet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mananet"))
        .args(args)
        .current_dir(dir)
        .env_remove("MANANET_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "{}", stderr(&out));
    out
}

fn planted(dir: &Path, spec: &str) {
    fs::write(dir.join("planted.spec"), spec).unwrap();
    ok(mananet(dir, &["gen", "planted", "--spec", "planted.spec", "--out", "data"]));
}

const SMALL: &str = "num_days = 510\nnoise_per_day = 4\n";

fn small_config(dir: &Path, extra: &str) {
    fs::write(
        dir.join("run.cfg"),
        format!(
            "prices = data/prices.csv\nnews = data/news.jsonl\nepochs = 5\nepsilon_grid = 2\n\
             lookback_grid = 1\nhidden_width = 4\n{extra}"
        ),
    )
    .unwrap();
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), SMALL);
    small_config(dir.path(), "learning_rat = 0.1\n");
    let out = mananet(dir.path(), &["train", "--config", "run.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("learning_rat"), "{}", stderr(&out));
}

#[test]
fn missing_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mananet(dir.path(), &["backtest", "--config", "run.cfg"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), SMALL);
    small_config(dir.path(), "");
    let out = mananet(
        dir.path(),
        &["backtest", "--config", "run.cfg", "--checkpoints", "nowhere", "--aggregator", "mana", "--pnl-mode", "as-written"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("window-00.ckpt"), "{}", stderr(&out));
}

#[test]
fn single_day_corpus_cannot_be_analyzed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("news.jsonl"),
        "{\"date\":\"2020-01-02\",\"id\":\"a\",\"pos\":0.2,\"neu\":0.5,\"neg\":0.3}\n\
         {\"date\":\"2020-01-02\",\"id\":\"b\",\"pos\":0.6,\"neu\":0.2,\"neg\":0.2}\n",
    )
    .unwrap();
    let out = mananet(dir.path(), &["analyze", "--news", "news.jsonl", "--out", "out"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn malformed_news_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("news.jsonl"),
        "{\"date\":\"2020-01-02\",\"id\":\"a\",\"pos\":0.2,\"neu\":0.5,\"neg\":0.3}\n{not json\n",
    )
    .unwrap();
    let out = mananet(dir.path(), &["analyze", "--news", "news.jsonl", "--out", "out"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("news.jsonl:2"), "{}", stderr(&out));
}

#[test]
fn divergent_training_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), SMALL);
    small_config(dir.path(), "learning_rate = 1e300\nclip_norm = 1e300\n");
    let out = mananet(dir.path(), &["train", "--config", "run.cfg"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn price_only_backtest_needs_no_news() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), SMALL);
    fs::remove_file(dir.path().join("data/news.jsonl")).unwrap();
    small_config(dir.path(), "");
    ok(mananet(
        dir.path(),
        &["backtest", "--config", "run.cfg", "--checkpoints", "none", "--aggregator", "price-only", "--pnl-mode", "directional"],
    ));
    let mean = fs::read_to_string(dir.path().join("out/backtest/directional/price-only/mean.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&mean).unwrap();
    assert_eq!(v["windows"], 1);
}

#[test]
fn analyze_reports_homogenization() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.spec"), "num_days = 60\nnews_min = 150\nnews_max = 150\n").unwrap();
    ok(mananet(dir.path(), &["gen", "homogenization", "--spec", "h.spec", "--out", "h"]));
    ok(mananet(dir.path(), &["analyze", "--news", "h/news.jsonl", "--out", "a"]));
    let table = fs::read_to_string(dir.path().join("a/reduction.csv")).unwrap();
    let rows: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| *r >= 0.8), "{rows:?}");
    for f in ["stats.csv", "kde.csv", "boxplot.csv", "summary.json"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn weights_need_multi_news_days() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), "num_days = 510\nnoise_per_day = 0\n");
    small_config(dir.path(), "");
    ok(mananet(dir.path(), &["train", "--config", "run.cfg"]));
    let out = mananet(
        dir.path(),
        &["weights", "--checkpoint", "out/checkpoints/window-00.ckpt", "--news", "data/news.jsonl", "--prices", "data/prices.csv", "--out", "w"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn checkpoint_with_wrong_dimensions_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), SMALL);
    small_config(dir.path(), "");
    ok(mananet(dir.path(), &["train", "--config", "run.cfg"]));
    let path = dir.path().join("out/checkpoints/window-00.ckpt");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("\nd_k = 4\n"));
    fs::write(&path, text.replace("\nd_k = 4\n", "\nd_k = 5\n")).unwrap();
    let out = mananet(
        dir.path(),
        &["weights", "--checkpoint", "out/checkpoints/window-00.ckpt", "--news", "data/news.jsonl", "--prices", "data/prices.csv", "--out", "w"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("do not match"), "{}", stderr(&out));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("a.spec"), "num_days = 20\nseed = 7\n").unwrap();
    fs::write(p.join("b.spec"), "num_days = 20\nseed = 1\n").unwrap();
    ok(mananet(p, &["gen", "planted", "--spec", "a.spec", "--out", "a"]));
    ok(mananet(p, &["gen", "planted", "--spec", "b.spec", "--out", "b"]));
    let env = Command::new(env!("CARGO_BIN_EXE_mananet"))
        .args(["gen", "planted", "--spec", "b.spec", "--out", "c"])
        .current_dir(p)
        .env("MANANET_SEED", "7")
        .output()
        .unwrap();
    ok(env);
    let read = |d: &str| fs::read(p.join(d).join("news.jsonl")).unwrap();
    assert_eq!(read("a"), read("c"));
    assert_ne!(read("a"), read("b"));
}

#[test]
fn generated_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    planted(dir.path(), "num_days = 40\n");
    let d = dir.path().join("data");
    let bars = mananet::io::load_prices(&d.join("prices.csv")).unwrap();
    let news = mananet::io::load_news(&d.join("news.jsonl")).unwrap();
    let truth = mananet::io::load_truth(&d.join("truth.csv")).unwrap();
    assert_eq!(bars.len(), 41);
    assert_eq!(news.len(), 40);
    assert_eq!(truth.len(), 40);
    mananet::io::write_prices(&d.join("again.csv"), &bars).unwrap();
    assert_eq!(fs::read(d.join("again.csv")).unwrap(), fs::read(d.join("prices.csv")).unwrap());
}
