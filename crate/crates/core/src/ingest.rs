//! Parsing, validation, and serialization of all external data files.
//!
//! File formats (fixed project-wide):
//! - `calendar.txt`: one ISO-8601 date per line, strictly increasing.
//! - `prices.csv`: header `stock_id,date,open,high,low,close`.
//! - `opinions.jsonl`: one JSON record per line (see [`load_opinions`]).
//! - `analyst_events.csv`: header `stock_id,date,analyst_id,kind`.
//! - `flows.csv`: header `stock_id,date,category,net_units`.
//!
//! Structural problems (missing file, bad header, unreadable row or record)
//! are hard errors. Row-level domain violations (off-calendar date, bad
//! price, unknown enumeration value, opinion invariant failure) do not abort
//! a load: the offending row is dropped and reported in the returned
//! rejection list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AnalystEvent, ArgLabel, Calendar, DailyBar, EventKind, FlowCategory, FlowRecord, Opinion,
    PriceSeries, Sentence, Source, Stance, validate_opinion,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty calendar")]
    EmptyCalendar,
    #[error("calendar line {line}: date {date} not after previous date")]
    NonMonotonicCalendar { line: usize, date: NaiveDate },
    #[error("calendar line {line}: invalid date {text:?}")]
    BadCalendarDate { line: usize, text: String },
    #[error("expected header {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("csv structure error: {0}")]
    Csv(#[from] csv::Error),
    #[error("record {record}: malformed record: {message}")]
    MalformedRecord { record: usize, message: String },
}

/// One rejected input row and the reason it was dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// 1-based data-row (or line) number in the source file.
    pub record: usize,
    /// Identifier of the rejected row when one was parseable.
    pub id: Option<String>,
    pub reason: String,
}

impl Rejection {
    fn new(record: usize, id: Option<String>, reason: impl Into<String>) -> Self {
        Self {
            record,
            id,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "record {} ({}): {}", self.record, id, self.reason),
            None => write!(f, "record {}: {}", self.record, self.reason),
        }
    }
}

/// A successfully loaded value plus the rows that were rejected on the way.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub rejections: Vec<Rejection>,
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()
}

/// Loads the exchange calendar, the single source of truth for trading-day
/// arithmetic. Errors (not rejections) on any defect: a broken calendar
/// invalidates every downstream date.
pub fn load_calendar(path: &Path) -> Result<Calendar, IngestError> {
    read_calendar(open(path)?)
}

pub fn read_calendar(reader: impl Read) -> Result<Calendar, IngestError> {
    let reader = BufReader::new(reader);
    let mut dates: Vec<NaiveDate> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: "<calendar>".into(),
            source,
        })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let date = parse_date(text).ok_or_else(|| IngestError::BadCalendarDate {
            line: line_no,
            text: text.to_string(),
        })?;
        if let Some(&last) = dates.last() {
            if date <= last {
                return Err(IngestError::NonMonotonicCalendar { line: line_no, date });
            }
        }
        dates.push(date);
    }
    if dates.is_empty() {
        return Err(IngestError::EmptyCalendar);
    }
    Ok(Calendar::from_dates(dates).expect("monotonicity checked above"))
}

pub fn write_calendar(calendar: &Calendar, mut out: impl Write) -> std::io::Result<()> {
    for date in calendar.dates() {
        writeln!(out, "{date}")?;
    }
    Ok(())
}

const PRICES_HEADER: &str = "stock_id,date,open,high,low,close";
const EVENTS_HEADER: &str = "stock_id,date,analyst_id,kind";
const FLOWS_HEADER: &str = "stock_id,date,category,net_units";

fn check_header(record: &csv::StringRecord, expected: &str) -> Result<(), IngestError> {
    let found = record.iter().collect::<Vec<_>>().join(",");
    if found != expected {
        return Err(IngestError::BadHeader {
            expected: expected.to_string(),
            found,
        });
    }
    Ok(())
}

/// Loads daily bars grouped per stock, sorted by date. Rows may arrive in any
/// order; duplicates of a (stock, date) pair keep the first row seen.
pub fn load_prices(
    path: &Path,
    calendar: &Calendar,
) -> Result<Loaded<BTreeMap<String, PriceSeries>>, IngestError> {
    read_prices(open(path)?, calendar)
}

pub fn read_prices(
    reader: impl Read,
    calendar: &Calendar,
) -> Result<Loaded<BTreeMap<String, PriceSeries>>, IngestError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    check_header(csv_reader.headers()?, PRICES_HEADER)?;

    let mut rejections = Vec::new();
    // (record number, bar) per stock so duplicate reporting can name the row
    let mut by_stock: BTreeMap<String, Vec<(usize, DailyBar)>> = BTreeMap::new();

    for (i, row) in csv_reader.records().enumerate() {
        let record_no = i + 1;
        let row = row?;
        if row.len() != 6 {
            return Err(IngestError::MalformedRecord {
                record: record_no,
                message: format!("expected 6 fields, found {}", row.len()),
            });
        }
        let stock_id = row[0].to_string();
        let id = Some(stock_id.clone());
        let Some(date) = parse_date(&row[1]) else {
            rejections.push(Rejection::new(record_no, id, format!("invalid date {:?}", &row[1])));
            continue;
        };
        let Some(day) = calendar.day(date) else {
            rejections.push(Rejection::new(record_no, id, format!("date {date} not on calendar")));
            continue;
        };
        let mut prices = [0.0f64; 4];
        let mut bad_field = None;
        for (slot, field) in [(0, 2usize), (1, 3), (2, 4), (3, 5)] {
            match row[field].parse::<f64>() {
                Ok(v) => prices[slot] = v,
                Err(_) => {
                    bad_field = Some(format!("invalid number {:?}", &row[field]));
                    break;
                }
            }
        }
        if let Some(message) = bad_field {
            rejections.push(Rejection::new(record_no, id, message));
            continue;
        }
        let [o, h, l, c] = prices;
        match DailyBar::new(day, o, h, l, c) {
            Ok(bar) => by_stock.entry(stock_id).or_default().push((record_no, bar)),
            Err(crate::model::ModelError::NonPositivePrice(p)) => {
                rejections.push(Rejection::new(record_no, id, format!("non-positive price {p}")));
            }
            Err(e) => rejections.push(Rejection::new(record_no, id, e.to_string())),
        }
    }

    let mut series = BTreeMap::new();
    for (stock_id, mut bars) in by_stock {
        bars.sort_by_key(|(_, bar)| bar.day.index);
        let mut deduped: Vec<DailyBar> = Vec::with_capacity(bars.len());
        for (record_no, bar) in bars {
            if deduped.last().map(|b| b.day.index) == Some(bar.day.index) {
                rejections.push(Rejection::new(
                    record_no,
                    Some(stock_id.clone()),
                    format!("duplicate date {}", bar.day.date),
                ));
            } else {
                deduped.push(bar);
            }
        }
        let s = PriceSeries::new(stock_id.clone(), deduped).expect("sorted and deduplicated");
        series.insert(stock_id, s);
    }

    Ok(Loaded {
        value: series,
        rejections,
    })
}

pub fn write_prices(
    prices: &BTreeMap<String, PriceSeries>,
    mut out: impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{PRICES_HEADER}")?;
    for series in prices.values() {
        for bar in series.bars() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                series.stock_id, bar.day.date, bar.open, bar.high, bar.low, bar.close
            )?;
        }
    }
    Ok(())
}

/// Raw shape of one `opinions.jsonl` record. Field names are part of the
/// file contract; enumerations stay as strings here so that unknown values
/// reject the record instead of aborting the load.
#[derive(Debug, Serialize, Deserialize)]
struct OpinionRecord {
    opinion_id: String,
    stock_id: String,
    date: String,
    stance: String,
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    price_target: Option<f64>,
    sentences: Vec<SentenceRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceRecord {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fsd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    supports: Vec<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    expert_like: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn opinion_from_record(
    record: OpinionRecord,
    calendar: &Calendar,
) -> Result<Opinion, String> {
    let date = parse_date(&record.date).ok_or_else(|| format!("invalid date {:?}", record.date))?;
    let release_day = calendar
        .day(date)
        .ok_or_else(|| format!("date {date} not on calendar"))?;
    let stance =
        Stance::parse(&record.stance).ok_or_else(|| format!("unknown stance {:?}", record.stance))?;
    let source =
        Source::parse(&record.source).ok_or_else(|| format!("unknown source {:?}", record.source))?;

    let mut sentences = Vec::with_capacity(record.sentences.len());
    for (sent_id, s) in record.sentences.into_iter().enumerate() {
        let label = match &s.label {
            None => ArgLabel::Other,
            Some(text) => {
                ArgLabel::parse(text).ok_or_else(|| format!("unknown label {text:?}"))?
            }
        };
        sentences.push(Sentence {
            sent_id,
            text: s.text,
            fsd: s.fsd,
            label,
            supports: s.supports.into_iter().collect(),
            expert_like: s.expert_like,
        });
    }

    let opinion = Opinion {
        opinion_id: record.opinion_id,
        stock_id: record.stock_id,
        release_day,
        stance,
        source,
        price_target: record.price_target,
        sentences,
    };
    let violations = validate_opinion(&opinion);
    if violations.is_empty() {
        Ok(opinion)
    } else {
        Err(violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; "))
    }
}

/// Loads opinions from line-delimited JSON. Every returned opinion passes
/// [`validate_opinion`]; records that do not are rejected with the reasons.
/// The result is sorted by opinion id.
pub fn load_opinions(path: &Path, calendar: &Calendar) -> Result<Loaded<Vec<Opinion>>, IngestError> {
    read_opinions(open(path)?, calendar)
}

pub fn read_opinions(
    reader: impl Read,
    calendar: &Calendar,
) -> Result<Loaded<Vec<Opinion>>, IngestError> {
    let reader = BufReader::new(reader);
    let mut rejections = Vec::new();
    let mut opinions: Vec<Opinion> = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();

    for (i, line) in reader.lines().enumerate() {
        let record_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: "<opinions>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: OpinionRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedRecord {
                record: record_no,
                message: e.to_string(),
            })?;
        let id = record.opinion_id.clone();
        match opinion_from_record(record, calendar) {
            Ok(op) => {
                if seen_ids.insert(op.opinion_id.clone()) {
                    opinions.push(op);
                } else {
                    rejections.push(Rejection::new(record_no, Some(id), "duplicate opinion_id"));
                }
            }
            Err(reason) => rejections.push(Rejection::new(record_no, Some(id), reason)),
        }
    }

    opinions.sort_by(|a, b| a.opinion_id.cmp(&b.opinion_id));
    Ok(Loaded {
        value: opinions,
        rejections,
    })
}

pub fn write_opinions(opinions: &[Opinion], mut out: impl Write) -> std::io::Result<()> {
    for op in opinions {
        let mut sentences: Vec<&Sentence> = op.sentences.iter().collect();
        sentences.sort_by_key(|s| s.sent_id);
        let record = OpinionRecord {
            opinion_id: op.opinion_id.clone(),
            stock_id: op.stock_id.clone(),
            date: op.release_day.date.to_string(),
            stance: op.stance.as_str().to_string(),
            source: op.source.as_str().to_string(),
            price_target: op.price_target,
            sentences: sentences
                .into_iter()
                .map(|s| SentenceRecord {
                    text: s.text.clone(),
                    fsd: s.fsd,
                    label: (s.label != ArgLabel::Other).then(|| s.label.as_str().to_string()),
                    supports: s.supports.iter().copied().collect(),
                    expert_like: s.expert_like,
                })
                .collect(),
        };
        let json = serde_json::to_string(&record).expect("record serialization cannot fail");
        writeln!(out, "{json}")?;
    }
    Ok(())
}

/// Loads analyst recommendation events, sorted by (stock, day).
pub fn load_analyst_events(
    path: &Path,
    calendar: &Calendar,
) -> Result<Loaded<Vec<AnalystEvent>>, IngestError> {
    read_analyst_events(open(path)?, calendar)
}

pub fn read_analyst_events(
    reader: impl Read,
    calendar: &Calendar,
) -> Result<Loaded<Vec<AnalystEvent>>, IngestError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    check_header(csv_reader.headers()?, EVENTS_HEADER)?;

    let mut rejections = Vec::new();
    let mut events = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        let record_no = i + 1;
        let row = row?;
        if row.len() != 4 {
            return Err(IngestError::MalformedRecord {
                record: record_no,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let stock_id = row[0].to_string();
        let id = Some(stock_id.clone());
        let Some(date) = parse_date(&row[1]) else {
            rejections.push(Rejection::new(record_no, id, format!("invalid date {:?}", &row[1])));
            continue;
        };
        let Some(day) = calendar.day(date) else {
            rejections.push(Rejection::new(record_no, id, format!("date {date} not on calendar")));
            continue;
        };
        let Some(kind) = EventKind::parse(&row[3]) else {
            rejections.push(Rejection::new(record_no, id, format!("unknown kind {:?}", &row[3])));
            continue;
        };
        events.push(AnalystEvent {
            stock_id,
            day,
            analyst_id: row[2].to_string(),
            kind,
        });
    }

    events.sort_by(|a, b| {
        (&a.stock_id, a.day.index, &a.analyst_id, a.kind.as_str()).cmp(&(
            &b.stock_id,
            b.day.index,
            &b.analyst_id,
            b.kind.as_str(),
        ))
    });
    Ok(Loaded {
        value: events,
        rejections,
    })
}

pub fn write_analyst_events(events: &[AnalystEvent], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{}",
            e.stock_id,
            e.day.date,
            e.analyst_id,
            e.kind.as_str()
        )?;
    }
    Ok(())
}

/// Loads institutional flow records, sorted by (stock, day, category).
pub fn load_flows(path: &Path, calendar: &Calendar) -> Result<Loaded<Vec<FlowRecord>>, IngestError> {
    read_flows(open(path)?, calendar)
}

pub fn read_flows(
    reader: impl Read,
    calendar: &Calendar,
) -> Result<Loaded<Vec<FlowRecord>>, IngestError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    check_header(csv_reader.headers()?, FLOWS_HEADER)?;

    let mut rejections = Vec::new();
    let mut flows = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        let record_no = i + 1;
        let row = row?;
        if row.len() != 4 {
            return Err(IngestError::MalformedRecord {
                record: record_no,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let stock_id = row[0].to_string();
        let id = Some(stock_id.clone());
        let Some(date) = parse_date(&row[1]) else {
            rejections.push(Rejection::new(record_no, id, format!("invalid date {:?}", &row[1])));
            continue;
        };
        let Some(day) = calendar.day(date) else {
            rejections.push(Rejection::new(record_no, id, format!("date {date} not on calendar")));
            continue;
        };
        let Some(category) = FlowCategory::parse(&row[2]) else {
            rejections.push(Rejection::new(
                record_no,
                id,
                format!("unknown category {:?}", &row[2]),
            ));
            continue;
        };
        let Ok(net_units) = row[3].parse::<i64>() else {
            rejections.push(Rejection::new(
                record_no,
                id,
                format!("invalid net_units {:?}", &row[3]),
            ));
            continue;
        };
        flows.push(FlowRecord {
            stock_id,
            day,
            category,
            net_units,
        });
    }

    flows.sort_by(|a, b| {
        (&a.stock_id, a.day.index, a.category, a.net_units).cmp(&(
            &b.stock_id,
            b.day.index,
            b.category,
            b.net_units,
        ))
    });
    Ok(Loaded {
        value: flows,
        rejections,
    })
}

pub fn write_flows(flows: &[FlowRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{FLOWS_HEADER}")?;
    for f in flows {
        writeln!(
            out,
            "{},{},{},{}",
            f.stock_id,
            f.day.date,
            f.category.as_str(),
            f.net_units
        )?;
    }
    Ok(())
}

/// Everything one evaluation run consumes, loaded and cross-validated.
#[derive(Debug, Clone)]
pub struct CorpusBundle {
    pub calendar: Calendar,
    pub opinions: Vec<Opinion>,
    pub prices: BTreeMap<String, PriceSeries>,
    pub analyst_events: Vec<AnalystEvent>,
    pub flows: Vec<FlowRecord>,
}

impl CorpusBundle {
    /// Opinions whose stock has no price series: (opinion_id, stock_id),
    /// sorted by opinion id. Never silently dropped; callers report these.
    pub fn missing_prices(&self) -> Vec<(String, String)> {
        let mut missing: Vec<(String, String)> = self
            .opinions
            .iter()
            .filter(|op| !self.prices.contains_key(&op.stock_id))
            .map(|op| (op.opinion_id.clone(), op.stock_id.clone()))
            .collect();
        missing.sort();
        missing
    }
}

/// Standard in-directory file names for a bundle.
pub const CALENDAR_FILE: &str = "calendar.txt";
pub const PRICES_FILE: &str = "prices.csv";
pub const OPINIONS_FILE: &str = "opinions.jsonl";
pub const EVENTS_FILE: &str = "analyst_events.csv";
pub const FLOWS_FILE: &str = "flows.csv";

/// Rejections collected across one full bundle load.
#[derive(Debug, Clone, Default)]
pub struct BundleReport {
    pub price_rejections: Vec<Rejection>,
    pub opinion_rejections: Vec<Rejection>,
    pub event_rejections: Vec<Rejection>,
    pub flow_rejections: Vec<Rejection>,
    /// (opinion_id, stock_id) pairs without a price series.
    pub missing_prices: Vec<(String, String)>,
}

impl BundleReport {
    pub fn is_clean(&self) -> bool {
        self.price_rejections.is_empty()
            && self.opinion_rejections.is_empty()
            && self.event_rejections.is_empty()
            && self.flow_rejections.is_empty()
            && self.missing_prices.is_empty()
    }
}

/// Loads a full bundle from a directory laid out with the standard names.
pub fn load_bundle(dir: &Path) -> Result<(CorpusBundle, BundleReport), IngestError> {
    let calendar = load_calendar(&dir.join(CALENDAR_FILE))?;
    let prices = load_prices(&dir.join(PRICES_FILE), &calendar)?;
    let opinions = load_opinions(&dir.join(OPINIONS_FILE), &calendar)?;
    let events = load_analyst_events(&dir.join(EVENTS_FILE), &calendar)?;
    let flows = load_flows(&dir.join(FLOWS_FILE), &calendar)?;

    let bundle = CorpusBundle {
        calendar,
        opinions: opinions.value,
        prices: prices.value,
        analyst_events: events.value,
        flows: flows.value,
    };
    let report = BundleReport {
        price_rejections: prices.rejections,
        opinion_rejections: opinions.rejections,
        event_rejections: events.rejections,
        flow_rejections: flows.rejections,
        missing_prices: bundle.missing_prices(),
    };
    Ok((bundle, report))
}

/// Writes a full bundle into a directory with the standard names.
pub fn write_bundle(bundle: &CorpusBundle, dir: &Path) -> std::io::Result<()> {
    use std::io::BufWriter;
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> std::io::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(dir.join(name))?))
    };
    let mut out = create(CALENDAR_FILE)?;
    write_calendar(&bundle.calendar, &mut out)?;
    out.flush()?;
    let mut out = create(PRICES_FILE)?;
    write_prices(&bundle.prices, &mut out)?;
    out.flush()?;
    let mut out = create(OPINIONS_FILE)?;
    write_opinions(&bundle.opinions, &mut out)?;
    out.flush()?;
    let mut out = create(EVENTS_FILE)?;
    write_analyst_events(&bundle.analyst_events, &mut out)?;
    out.flush()?;
    let mut out = create(FLOWS_FILE)?;
    write_flows(&bundle.flows, &mut out)?;
    out.flush()?;
    Ok(())
}
