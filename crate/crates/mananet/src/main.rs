use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mananet::commands::{self, Aggregator, Corpus};
use mananet_core::eval::PnlMode;

#[derive(Parser)]
#[command(name = "mananet", version, about = "Market-news attention aggregation and backtesting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Homogenization statistics of a news corpus.
    Analyze {
        #[arg(long)]
        news: PathBuf,
        /// Roll news forward onto these trading days first.
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus.
    Gen {
        #[arg(value_enum)]
        kind: Corpus,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Walk-forward grid search; writes checkpoints and the trial log.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Also record per-trial wall time here.
        #[arg(long)]
        timings: Option<PathBuf>,
    },
    /// Test-range backtests for one or more aggregators.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoints: PathBuf,
        /// Comma-separated: mana, cf, senf, sumf, af, faf, price-only.
        #[arg(long, value_delimiter = ',', required = true)]
        aggregator: Vec<String>,
        #[arg(long, value_parser = parse_mode)]
        pnl_mode: PnlMode,
    },
    /// Pooled normalized attention weights of a checkpoint.
    Weights {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        news: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<PnlMode, String> {
    s.parse().map_err(|e: mananet_core::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<Vec<String>> {
    match cli.command {
        Command::Analyze { news, prices, out } => commands::analyze(&news, prices.as_deref(), &out),
        Command::Gen { kind, spec, out } => commands::generate(kind, &spec, &out),
        Command::Train { config, timings } => commands::train(&config, timings.as_deref()),
        Command::Backtest {
            config,
            checkpoints,
            aggregator,
            pnl_mode,
        } => {
            let aggs = aggregator
                .iter()
                .map(|a| a.parse::<Aggregator>())
                .collect::<anyhow::Result<Vec<_>>>()?;
            commands::backtest_cmd(&config, &checkpoints, &aggs, pnl_mode)
        }
        Command::Weights {
            checkpoint,
            news,
            prices,
            truth,
            out,
        } => commands::weights(&checkpoint, &news, &prices, truth.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
