//! Shared domain types: trading days, price bars, opinions, events, and flows.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Construction of price data goes through checked constructors;
//! opinions are validated separately with [`validate_opinion`], which reports
//! violations as data rather than failing.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by checked constructors of the core types.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("non-positive price: {0}")]
    NonPositivePrice(f64),
    #[error("bar violates low <= open/close <= high: open={open} high={high} low={low} close={close}")]
    BarOrdering {
        open: f64,
        high: f64,
        low: f64,
        close: f64,
    },
    #[error("price series for {stock_id}: bar days not strictly increasing at position {position}")]
    UnorderedBars { stock_id: String, position: usize },
    #[error("calendar dates not strictly increasing at entry {position}: {date}")]
    UnorderedCalendar { position: usize, date: NaiveDate },
    #[error("empty calendar")]
    EmptyCalendar,
}

/// A date on the exchange calendar together with its ordinal position.
///
/// The index makes `t + T` arithmetic a plain integer addition that skips
/// non-trading days for free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TradingDay {
    pub date: NaiveDate,
    pub index: usize,
}

impl TradingDay {
    pub fn new(date: NaiveDate, index: usize) -> Self {
        Self { date, index }
    }
}

impl fmt::Display for TradingDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.date)
    }
}

/// The exchange calendar: the universal index space for [`TradingDay`]s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calendar {
    days: Vec<NaiveDate>,
    index_of: HashMap<NaiveDate, usize>,
}

impl Calendar {
    /// Builds a calendar from strictly increasing dates.
    pub fn from_dates(dates: Vec<NaiveDate>) -> Result<Self, ModelError> {
        if dates.is_empty() {
            return Err(ModelError::EmptyCalendar);
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(ModelError::UnorderedCalendar {
                    position: i + 1,
                    date: pair[1],
                });
            }
        }
        let index_of = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        Ok(Self {
            days: dates,
            index_of,
        })
    }

    /// Resolves a calendar date to its trading day, if it is on the calendar.
    pub fn day(&self, date: NaiveDate) -> Option<TradingDay> {
        self.index_of.get(&date).map(|&i| TradingDay::new(date, i))
    }

    /// The trading day at an ordinal position.
    pub fn at(&self, index: usize) -> Option<TradingDay> {
        self.days.get(index).map(|&d| TradingDay::new(d, index))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.days
    }
}

/// One day of open/high/low/close prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyBar {
    pub day: TradingDay,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl DailyBar {
    /// Checked constructor: all prices positive, low <= open/close <= high.
    pub fn new(
        day: TradingDay,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
    ) -> Result<Self, ModelError> {
        for price in [open, high, low, close] {
            if !price.is_finite() || price <= 0.0 {
                return Err(ModelError::NonPositivePrice(price));
            }
        }
        if low > open || open > high || low > close || close > high {
            return Err(ModelError::BarOrdering {
                open,
                high,
                low,
                close,
            });
        }
        Ok(Self {
            day,
            open,
            high,
            low,
            close,
        })
    }
}

/// Per-stock calendar of daily bars, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub stock_id: String,
    bars: Vec<DailyBar>,
}

impl PriceSeries {
    pub fn new(stock_id: impl Into<String>, bars: Vec<DailyBar>) -> Result<Self, ModelError> {
        let stock_id = stock_id.into();
        for (i, pair) in bars.windows(2).enumerate() {
            if pair[1].day.index <= pair[0].day.index || pair[1].day.date <= pair[0].day.date {
                return Err(ModelError::UnorderedBars {
                    stock_id,
                    position: i + 1,
                });
            }
        }
        Ok(Self { stock_id, bars })
    }

    pub fn bars(&self) -> &[DailyBar] {
        &self.bars
    }

    /// The bar at calendar index `index`, if the series has one.
    pub fn bar_at_index(&self, index: usize) -> Option<&DailyBar> {
        self.bars
            .binary_search_by_key(&index, |b| b.day.index)
            .ok()
            .map(|pos| &self.bars[pos])
    }
}

/// Direction an opinion takes on a stock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Bullish,
    Bearish,
}

impl Stance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stance::Bullish => "bullish",
            Stance::Bearish => "bearish",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bullish" => Some(Stance::Bullish),
            "bearish" => Some(Stance::Bearish),
            _ => None,
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Argument-mining role of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArgLabel {
    Claim,
    Premise,
    #[default]
    Other,
}

impl ArgLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArgLabel::Claim => "claim",
            ArgLabel::Premise => "premise",
            ArgLabel::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "claim" => Some(ArgLabel::Claim),
            "premise" => Some(ArgLabel::Premise),
            "other" => Some(ArgLabel::Other),
            _ => None,
        }
    }
}

/// Who wrote the opinion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Professional,
    Amateur,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Professional => "professional",
            Source::Amateur => "amateur",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "professional" => Some(Source::Professional),
            "amateur" => Some(Source::Amateur),
            _ => None,
        }
    }
}

/// One sentence of an opinion with optional annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    /// 0-based id within the opinion.
    pub sent_id: usize,
    pub text: String,
    /// Fuzzy strength degree in [0,1], when scored.
    pub fsd: Option<f64>,
    pub label: ArgLabel,
    /// Ids of the claims this premise supports.
    pub supports: BTreeSet<usize>,
    pub expert_like: bool,
}

impl Sentence {
    pub fn new(sent_id: usize, text: impl Into<String>) -> Self {
        Self {
            sent_id,
            text: text.into(),
            fsd: None,
            label: ArgLabel::Other,
            supports: BTreeSet::new(),
            expert_like: false,
        }
    }

    pub fn with_fsd(mut self, fsd: f64) -> Self {
        self.fsd = Some(fsd);
        self
    }

    pub fn with_label(mut self, label: ArgLabel) -> Self {
        self.label = label;
        self
    }

    pub fn with_supports(mut self, supports: impl IntoIterator<Item = usize>) -> Self {
        self.supports = supports.into_iter().collect();
        self
    }

    pub fn with_expert_like(mut self, expert_like: bool) -> Self {
        self.expert_like = expert_like;
        self
    }
}

/// A dated, stance-tagged document of sentences.
///
/// `release_day` is both the release date and the day MPP measurement is
/// anchored to; the two coincide in all day arithmetic here.
#[derive(Debug, Clone, PartialEq)]
pub struct Opinion {
    pub opinion_id: String,
    pub stock_id: String,
    pub release_day: TradingDay,
    pub stance: Stance,
    pub source: Source,
    pub price_target: Option<f64>,
    pub sentences: Vec<Sentence>,
}

/// Analyst recommendation activity on one stock on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalystEvent {
    pub stock_id: String,
    pub day: TradingDay,
    pub analyst_id: String,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ViewChange,
    Other,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::ViewChange => "view_change",
            EventKind::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "view_change" => Some(EventKind::ViewChange),
            "other" => Some(EventKind::Other),
            _ => None,
        }
    }
}

/// Net units an institutional category bought (positive) or sold (negative).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub stock_id: String,
    pub day: TradingDay,
    pub category: FlowCategory,
    pub net_units: i64,
}

/// Institutional trader category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowCategory {
    Qfii,
    Fund,
    Dealer,
}

impl FlowCategory {
    pub const ALL: [FlowCategory; 3] = [FlowCategory::Qfii, FlowCategory::Fund, FlowCategory::Dealer];

    pub fn as_str(&self) -> &'static str {
        match self {
            FlowCategory::Qfii => "QFII",
            FlowCategory::Fund => "Fund",
            FlowCategory::Dealer => "Dealer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "QFII" => Some(FlowCategory::Qfii),
            "Fund" => Some(FlowCategory::Fund),
            "Dealer" => Some(FlowCategory::Dealer),
            _ => None,
        }
    }
}

impl fmt::Display for FlowCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One violated invariant of an [`Opinion`]; violations are data, not failures.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoSentences,
    /// Sentence ids are not exactly the set {0, .., n-1}.
    NonContiguousSentenceIds {
        found: Vec<usize>,
    },
    FsdOutOfRange {
        sent_id: usize,
        fsd: f64,
    },
    /// A non-premise sentence carries support links.
    SupportsOnNonPremise {
        sent_id: usize,
    },
    /// A support link points at a sentence that is not a claim.
    SupportTargetNotClaim {
        sent_id: usize,
        target: usize,
    },
    /// A support link points outside the opinion.
    SupportTargetMissing {
        sent_id: usize,
        target: usize,
    },
    NonPositivePriceTarget {
        price_target: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSentences => write!(f, "opinion has no sentences"),
            Violation::NonContiguousSentenceIds { found } => {
                write!(f, "sentence ids not contiguous from 0: {found:?}")
            }
            Violation::FsdOutOfRange { sent_id, fsd } => {
                write!(f, "sentence {sent_id}: fsd {fsd} outside [0,1]")
            }
            Violation::SupportsOnNonPremise { sent_id } => {
                write!(f, "sentence {sent_id}: supports present but label is not premise")
            }
            Violation::SupportTargetNotClaim { sent_id, target } => {
                write!(f, "sentence {sent_id} supports sentence {target}, which is not a claim")
            }
            Violation::SupportTargetMissing { sent_id, target } => {
                write!(f, "sentence {sent_id} supports missing sentence {target}")
            }
            Violation::NonPositivePriceTarget { price_target } => {
                write!(f, "non-positive price target {price_target}")
            }
        }
    }
}

/// Checks every `Opinion` and `Sentence` invariant, returning all violations.
///
/// Pure and deterministic: the same opinion always yields the identical list.
pub fn validate_opinion(op: &Opinion) -> Vec<Violation> {
    let mut violations = Vec::new();

    if op.sentences.is_empty() {
        violations.push(Violation::NoSentences);
    }

    let mut ids: Vec<usize> = op.sentences.iter().map(|s| s.sent_id).collect();
    ids.sort_unstable();
    let contiguous = ids.iter().copied().eq(0..op.sentences.len());
    if !op.sentences.is_empty() && !contiguous {
        violations.push(Violation::NonContiguousSentenceIds { found: ids });
    }

    let labels: HashMap<usize, ArgLabel> = op
        .sentences
        .iter()
        .map(|s| (s.sent_id, s.label))
        .collect();

    for sentence in &op.sentences {
        if let Some(fsd) = sentence.fsd {
            if !(0.0..=1.0).contains(&fsd) || fsd.is_nan() {
                violations.push(Violation::FsdOutOfRange {
                    sent_id: sentence.sent_id,
                    fsd,
                });
            }
        }
        if !sentence.supports.is_empty() && sentence.label != ArgLabel::Premise {
            violations.push(Violation::SupportsOnNonPremise {
                sent_id: sentence.sent_id,
            });
        }
        for &target in &sentence.supports {
            match labels.get(&target) {
                None => violations.push(Violation::SupportTargetMissing {
                    sent_id: sentence.sent_id,
                    target,
                }),
                Some(ArgLabel::Claim) => {}
                Some(_) => violations.push(Violation::SupportTargetNotClaim {
                    sent_id: sentence.sent_id,
                    target,
                }),
            }
        }
    }

    if let Some(pt) = op.price_target {
        if !pt.is_finite() || pt <= 0.0 {
            violations.push(Violation::NonPositivePriceTarget { price_target: pt });
        }
    }

    violations
}
