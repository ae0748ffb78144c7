//! Per-opinion profit and risk outcomes over the post-release horizon.
//!
//! Entry is always the open of the first trading day after release. MPP is
//! the best achievable fractional return exiting at the optimal high
//! (bullish) or low (bearish) within the horizon; ML is the worst drawdown
//! for the same position. The bearish formulas come in two modes:
//! `ProfitConsistent` (default) takes the best case for MPP and the worst
//! for ML, matching the metric names; `Literal` flips the bearish extremes,
//! for auditing results produced under that convention.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::CorpusBundle;
use crate::model::{DailyBar, Opinion, PriceSeries, Stance, TradingDay};

#[derive(Debug, Error, PartialEq)]
pub enum BacktestError {
    #[error("opinion {opinion_id}: no entry price (no bar on the day after release)")]
    NoEntryPrice { opinion_id: String },
    #[error("outcomes file line {line}: {message}")]
    BadOutcomesFile { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BacktestError {
    fn from(e: std::io::Error) -> Self {
        BacktestError::Io(e.to_string())
    }
}

/// Which reading of the bearish formulas to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EquationMode {
    /// Bearish MPP takes the max, bearish ML the min: consistent with
    /// "maximum possible profit" / "maximum loss" semantics.
    #[default]
    ProfitConsistent,
    /// Bearish MPP takes the min, bearish ML the max.
    Literal,
}

impl EquationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquationMode::ProfitConsistent => "profit-consistent",
            EquationMode::Literal => "literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "profit-consistent" => Some(EquationMode::ProfitConsistent),
            "literal" => Some(EquationMode::Literal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    /// Horizon T in trading days; the window is [t+1, t+T].
    pub horizon_days: usize,
    pub equation_mode: EquationMode,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            horizon_days: 60,
            equation_mode: EquationMode::ProfitConsistent,
        }
    }
}

/// Profit and risk of one opinion against its price series.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutcome {
    pub opinion_id: String,
    pub stance: Stance,
    /// Maximum possible profit as a fractional return.
    pub mpp: f64,
    /// Maximum loss as a fractional return.
    pub ml: f64,
    /// First tradable day, t+1.
    pub entry_day: TradingDay,
    /// Last day actually covered by the window.
    pub window_end: TradingDay,
    /// True when the series ended before t+T.
    pub truncated: bool,
}

/// The slice of bars in [t+1, t+T] plus truncation status.
struct Window<'a> {
    bars: &'a [DailyBar],
    truncated: bool,
}

fn window<'a>(
    op: &Opinion,
    series: &'a PriceSeries,
    cfg: &BacktestConfig,
) -> Result<Window<'a>, BacktestError> {
    let entry_index = op.release_day.index + 1;
    let last_index = op.release_day.index + cfg.horizon_days;
    let bars = series.bars();
    let start = bars.partition_point(|b| b.day.index < entry_index);
    if bars.get(start).map(|b| b.day.index) != Some(entry_index) {
        return Err(BacktestError::NoEntryPrice {
            opinion_id: op.opinion_id.clone(),
        });
    }
    let end = bars.partition_point(|b| b.day.index <= last_index);
    let truncated = bars.last().map(|b| b.day.index) < Some(last_index);
    Ok(Window {
        bars: &bars[start..end],
        truncated,
    })
}

fn fold_returns(
    bars: &[DailyBar],
    entry_open: f64,
    numerator: impl Fn(&DailyBar) -> f64,
    take_max: bool,
) -> f64 {
    let mut best = f64::NAN;
    for bar in bars {
        let value = numerator(bar) / entry_open;
        best = if best.is_nan() {
            value
        } else if take_max {
            best.max(value)
        } else {
            best.min(value)
        };
    }
    best
}

/// Maximum possible profit over the window.
///
/// Bullish: `max_i (H_i - O_{t+1}) / O_{t+1}`. Bearish: the same over
/// `(O_{t+1} - L_i)`, with max in profit-consistent mode and min in literal
/// mode. A window shorter than T is used as-is (the caller learns about
/// truncation from [`backtest_opinion`]).
pub fn compute_mpp(
    op: &Opinion,
    series: &PriceSeries,
    cfg: &BacktestConfig,
) -> Result<f64, BacktestError> {
    let w = window(op, series, cfg)?;
    let entry_open = w.bars[0].open;
    Ok(match (op.stance, cfg.equation_mode) {
        (Stance::Bullish, _) => fold_returns(w.bars, entry_open, |b| b.high - entry_open, true),
        (Stance::Bearish, EquationMode::ProfitConsistent) => {
            fold_returns(w.bars, entry_open, |b| entry_open - b.low, true)
        }
        (Stance::Bearish, EquationMode::Literal) => {
            fold_returns(w.bars, entry_open, |b| entry_open - b.low, false)
        }
    })
}

/// Maximum loss over the window.
///
/// Bullish: `min_i (L_i - O_{t+1}) / O_{t+1}`. Bearish: over
/// `(O_{t+1} - H_i)`, with min in profit-consistent mode and max in literal
/// mode.
pub fn compute_ml(
    op: &Opinion,
    series: &PriceSeries,
    cfg: &BacktestConfig,
) -> Result<f64, BacktestError> {
    let w = window(op, series, cfg)?;
    let entry_open = w.bars[0].open;
    Ok(match (op.stance, cfg.equation_mode) {
        (Stance::Bullish, _) => fold_returns(w.bars, entry_open, |b| b.low - entry_open, false),
        (Stance::Bearish, EquationMode::ProfitConsistent) => {
            fold_returns(w.bars, entry_open, |b| entry_open - b.high, false)
        }
        (Stance::Bearish, EquationMode::Literal) => {
            fold_returns(w.bars, entry_open, |b| entry_open - b.high, true)
        }
    })
}

/// Computes both metrics plus window metadata.
pub fn backtest_opinion(
    op: &Opinion,
    series: &PriceSeries,
    cfg: &BacktestConfig,
) -> Result<BacktestOutcome, BacktestError> {
    let w = window(op, series, cfg)?;
    let mpp = compute_mpp(op, series, cfg)?;
    let ml = compute_ml(op, series, cfg)?;
    Ok(BacktestOutcome {
        opinion_id: op.opinion_id.clone(),
        stance: op.stance,
        mpp,
        ml,
        entry_day: w.bars[0].day,
        window_end: w.bars[w.bars.len() - 1].day,
        truncated: w.truncated,
    })
}

/// An opinion that could not be backtested and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedOpinion {
    pub opinion_id: String,
    pub stock_id: String,
    pub reason: String,
}

/// Backtests every opinion in the bundle. Opinions without a price series or
/// entry bar are reported in the skip list, never silently dropped. Outcomes
/// come back sorted by opinion id.
pub fn backtest_corpus(
    bundle: &CorpusBundle,
    cfg: &BacktestConfig,
) -> (Vec<BacktestOutcome>, Vec<SkippedOpinion>) {
    let mut outcomes = Vec::new();
    let mut skipped = Vec::new();
    for op in &bundle.opinions {
        let Some(series) = bundle.prices.get(&op.stock_id) else {
            skipped.push(SkippedOpinion {
                opinion_id: op.opinion_id.clone(),
                stock_id: op.stock_id.clone(),
                reason: "no price series".into(),
            });
            continue;
        };
        match backtest_opinion(op, series, cfg) {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => skipped.push(SkippedOpinion {
                opinion_id: op.opinion_id.clone(),
                stock_id: op.stock_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    outcomes.sort_by(|a, b| a.opinion_id.cmp(&b.opinion_id));
    skipped.sort_by(|a, b| a.opinion_id.cmp(&b.opinion_id));
    (outcomes, skipped)
}

pub const OUTCOMES_HEADER: &str = "opinion_id,stance,mpp,ml,truncated";

pub fn write_outcomes(outcomes: &[BacktestOutcome], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{OUTCOMES_HEADER}")?;
    for o in outcomes {
        writeln!(
            out,
            "{},{},{},{},{}",
            o.opinion_id, o.stance, o.mpp, o.ml, o.truncated
        )?;
    }
    Ok(())
}

/// The row shape of `outcomes.csv` (window metadata is not persisted).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRow {
    pub opinion_id: String,
    pub stance: Stance,
    pub mpp: f64,
    pub ml: f64,
    pub truncated: bool,
}

/// Reads `outcomes.csv` into a map keyed by opinion id.
pub fn read_outcomes(reader: impl Read) -> Result<BTreeMap<String, OutcomeRow>, BacktestError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let header = csv_reader
        .headers()
        .map_err(|e| BacktestError::BadOutcomesFile {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != OUTCOMES_HEADER {
        return Err(BacktestError::BadOutcomesFile {
            line: 1,
            message: format!("expected header {OUTCOMES_HEADER:?}, found {header:?}"),
        });
    }
    let mut outcomes = BTreeMap::new();
    for (i, row) in csv_reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| BacktestError::BadOutcomesFile {
            line,
            message: e.to_string(),
        })?;
        if row.len() != 5 {
            return Err(BacktestError::BadOutcomesFile {
                line,
                message: format!("expected 5 fields, found {}", row.len()),
            });
        }
        let stance = Stance::parse(&row[1]).ok_or_else(|| BacktestError::BadOutcomesFile {
            line,
            message: format!("unknown stance {:?}", &row[1]),
        })?;
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| BacktestError::BadOutcomesFile {
                    line,
                    message: format!("invalid number {s:?}"),
                })
        };
        let truncated = row[4].parse::<bool>().map_err(|_| BacktestError::BadOutcomesFile {
            line,
            message: format!("invalid truncated flag {:?}", &row[4]),
        })?;
        let record = OutcomeRow {
            opinion_id: row[0].to_string(),
            stance,
            mpp: parse_f64(&row[2])?,
            ml: parse_f64(&row[3])?,
            truncated,
        };
        if outcomes.insert(record.opinion_id.clone(), record).is_some() {
            return Err(BacktestError::BadOutcomesFile {
                line,
                message: format!("duplicate opinion_id {:?}", &row[0]),
            });
        }
    }
    Ok(outcomes)
}
