//! Ranking of investor opinions by argument strength, with profit, risk,
//! statistical, and professional-behavior evaluation of the rankings.
//!
//! The pipeline: ingest (or synthesize) a corpus of stance-tagged opinions
//! with price data, score each opinion under one or more aggregation
//! strategies, backtest maximum possible profit (MPP) and maximum loss (ML)
//! over a fixed trading-day horizon, then evaluate the rankings with decile
//! and top-K averages, nDCG, the Friedman test, and analyst/trader reaction
//! ratios.
//!
//! # Modules
//!
//! - [`model`]: shared domain types and opinion validation
//! - [`ingest`]: file formats, parsers, and writers
//! - [`scoring`]: FSD providers, SD from price targets, strategy scores
//! - [`backtest`]: MPP and ML over the post-release window
//! - [`evaluation`]: ranking, deciles, top-K, nDCG, Friedman
//! - [`behavior`]: analyst view-change and trader concurring ratios
//! - [`synth`]: deterministic synthetic corpora

pub mod backtest;
pub mod behavior;
pub mod evaluation;
pub mod ingest;
pub mod model;
pub mod scoring;
pub mod synth;

pub use backtest::{BacktestConfig, BacktestOutcome, EquationMode};
pub use ingest::CorpusBundle;
pub use model::{Opinion, PriceSeries, Stance, TradingDay};
pub use scoring::{FsdProvider, Strategy, StrategyScore};
pub use synth::SynthConfig;
