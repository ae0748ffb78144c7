//! `oprank`: rank investor opinions by argument-strength scores and evaluate
//! the rankings with profit, risk, statistical, and behavior metrics.
//!
//! Subcommands cover the whole pipeline: `synth` generates a corpus,
//! `score` produces per-strategy opinion scores, `backtest` computes MPP/ML
//! outcomes, `evaluate` builds decile/top-K/nDCG/Friedman reports, and
//! `behavior` measures analyst and trader reactions. Every command writes
//! plain CSV plus a `run_manifest.json` into `--out`.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "oprank", version, about)]
struct Cli {
    /// Exchange calendar file (one ISO date per line).
    #[arg(long, global = true)]
    calendar: Option<PathBuf>,

    /// Output directory for reports and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for commands that generate data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (calendar, prices, opinions, events, flows).
    Synth {
        /// TOML generator config; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score opinions under one or more aggregation strategies.
    Score {
        /// Opinions file (line-delimited JSON records).
        #[arg(long)]
        opinions: PathBuf,
        /// Score file `opinion_id,sent_id,fsd` (scorefile provider).
        #[arg(long, conflicts_with = "lexicon")]
        scores: Option<PathBuf>,
        /// Lexicon file `term<TAB>weight` (lexicon provider).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Comma-separated strategy names, e.g. AllSent,KeyPremise.
        #[arg(long, value_delimiter = ',', required = true)]
        strategies: Vec<String>,
    },
    /// Compute MPP and ML outcomes for every opinion.
    Backtest {
        #[arg(long)]
        opinions: PathBuf,
        /// Prices file `stock_id,date,open,high,low,close`.
        #[arg(long)]
        prices: PathBuf,
        /// Horizon T in trading days.
        #[arg(long, default_value_t = 60)]
        horizon: usize,
        /// profit-consistent or literal.
        #[arg(long, default_value = "profit-consistent")]
        equation_mode: String,
    },
    /// Rank scored opinions and report decile, top-K, nDCG, and Friedman results.
    Evaluate {
        /// strategy_scores.csv from the score command.
        #[arg(long)]
        scores: PathBuf,
        /// outcomes.csv from the backtest command.
        #[arg(long)]
        outcomes: PathBuf,
        /// Comma-separated top-K sizes.
        #[arg(long, value_delimiter = ',', default_value = "10,20")]
        topk: Vec<usize>,
        /// Also report nDCG with relevance = max(MPP, 0).
        #[arg(long)]
        ndcg: bool,
        /// Optional nDCG cutoff.
        #[arg(long)]
        ndcg_cutoff: Option<usize>,
    },
    /// Report analyst view-change and trader concurring ratios per decile.
    Behavior {
        /// strategy_scores.csv from the score command.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        opinions: PathBuf,
        /// Analyst events file `stock_id,date,analyst_id,kind`.
        #[arg(long)]
        events: PathBuf,
        /// Flows file `stock_id,date,category,net_units`.
        #[arg(long)]
        flows: PathBuf,
        /// First day of the analyst window (offset from release).
        #[arg(long, default_value_t = 1)]
        ana_start: usize,
        /// Last day of the analyst window, inclusive.
        #[arg(long, default_value_t = 6)]
        ana_end: usize,
        /// Day the flow direction is checked (offset from release).
        #[arg(long, default_value_t = 1)]
        cr_offset: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out = commands::require_out(cli.out.as_deref())?;
    match cli.command {
        Command::Synth { config } => {
            commands::synth::run(config.as_deref(), cli.seed, &out)
        }
        Command::Score {
            opinions,
            scores,
            lexicon,
            strategies,
        } => commands::score::run(
            &opinions,
            scores.as_deref(),
            lexicon.as_deref(),
            &strategies,
            cli.calendar.as_deref(),
            &out,
        ),
        Command::Backtest {
            opinions,
            prices,
            horizon,
            equation_mode,
        } => commands::backtest::run(
            &opinions,
            &prices,
            horizon,
            &equation_mode,
            cli.calendar.as_deref(),
            &out,
        ),
        Command::Evaluate {
            scores,
            outcomes,
            topk,
            ndcg,
            ndcg_cutoff,
        } => commands::evaluate::run(&scores, &outcomes, &topk, ndcg, ndcg_cutoff, &out),
        Command::Behavior {
            scores,
            opinions,
            events,
            flows,
            ana_start,
            ana_end,
            cr_offset,
        } => commands::behavior::run(
            &scores,
            &opinions,
            &events,
            &flows,
            ana_start,
            ana_end,
            cr_offset,
            cli.calendar.as_deref(),
            &out,
        ),
    }
}
