//! Sentence-level strength scores and their aggregation to opinion level.
//!
//! FSD values normally come from a trained classifier; here they arrive via
//! pluggable providers (already-embedded values, a score file, or a
//! deterministic lexicon baseline) so the rest of the pipeline is exercisable
//! without any model. Strength degree (SD) from price targets is computed
//! directly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{ArgLabel, Opinion};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("non-positive input to SD: price_target={price_target}, close={close}")]
    NonPositiveSdInput { price_target: f64, close: f64 },
    #[error("opinion {opinion_id} sentence {sent_id}: no fsd available")]
    MissingFsd { opinion_id: String, sent_id: usize },
    #[error("score file has no entry for opinion {opinion_id} sentence {sent_id}")]
    MissingScoreEntry { opinion_id: String, sent_id: usize },
    #[error("score file line {line}: {message}")]
    BadScoreFile { line: usize, message: String },
    #[error("lexicon line {line}: {message}")]
    BadLexicon { line: usize, message: String },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ScoringError {
    fn from(e: std::io::Error) -> Self {
        ScoringError::Io(e.to_string())
    }
}

/// Strength degree implied by a price target: `(PT - C) / C`.
pub fn compute_sd(price_target: f64, close_at_release: f64) -> Result<f64, ScoringError> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(price_target) || !positive(close_at_release) {
        return Err(ScoringError::NonPositiveSdInput {
            price_target,
            close: close_at_release,
        });
    }
    Ok((price_target - close_at_release) / close_at_release)
}

/// Threshold splitting sentences by whether their SD beats the corpus mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdConfig {
    pub mean_sd_threshold: f64,
}

impl Default for SdConfig {
    fn default() -> Self {
        Self {
            mean_sd_threshold: 0.2251,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdBucket {
    AboveMean,
    AtOrBelowMean,
}

/// Buckets an SD against the configured mean; the boundary falls below.
pub fn bucket_sd(sd: f64, cfg: &SdConfig) -> SdBucket {
    if sd > cfg.mean_sd_threshold {
        SdBucket::AboveMean
    } else {
        SdBucket::AtOrBelowMean
    }
}

/// Term-weight table for the lexicon baseline. Weights live in [-1, 1];
/// matching is case-insensitive on whole tokens.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    weights: HashMap<String, f64>,
}

impl Lexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        let weights = entries
            .into_iter()
            .map(|(term, w)| (term.to_lowercase(), w))
            .collect();
        Self { weights }
    }

    /// Parses `term<TAB>weight` lines.
    pub fn read(reader: impl Read) -> Result<Self, ScoringError> {
        let reader = BufReader::new(reader);
        let mut weights = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let text = line.trim_end_matches('\n');
            if text.trim().is_empty() {
                continue;
            }
            let Some((term, weight)) = text.split_once('\t') else {
                return Err(ScoringError::BadLexicon {
                    line: line_no,
                    message: "expected term<TAB>weight".into(),
                });
            };
            let weight: f64 = weight.trim().parse().map_err(|_| ScoringError::BadLexicon {
                line: line_no,
                message: format!("invalid weight {weight:?}"),
            })?;
            if !(-1.0..=1.0).contains(&weight) {
                return Err(ScoringError::BadLexicon {
                    line: line_no,
                    message: format!("weight {weight} outside [-1,1]"),
                });
            }
            weights.insert(term.trim().to_lowercase(), weight);
        }
        Ok(Self { weights })
    }

    pub fn load(path: &Path) -> Result<Self, ScoringError> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.weights.get(token).copied()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Deterministic lexicon baseline: logistic of the summed weights of every
/// matched token occurrence; 0.5 when nothing matches. Tokens are maximal
/// alphanumeric runs, compared case-insensitively.
pub fn lexicon_fsd(text: &str, lexicon: &Lexicon) -> f64 {
    let mut sum = 0.0;
    for token in text.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        if let Some(w) = lexicon.weight(&token.to_lowercase()) {
            sum += w;
        }
    }
    logistic(sum)
}

/// Lookup table for the score-file provider: (opinion_id, sent_id) -> fsd.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    scores: HashMap<(String, usize), f64>,
}

impl ScoreTable {
    pub fn new(entries: impl IntoIterator<Item = ((String, usize), f64)>) -> Self {
        Self {
            scores: entries.into_iter().collect(),
        }
    }

    /// Parses `scores.csv` with header `opinion_id,sent_id,fsd`.
    pub fn read(reader: impl Read) -> Result<Self, ScoringError> {
        let mut csv_reader = csv::Reader::from_reader(reader);
        let header = csv_reader
            .headers()
            .map_err(|e| ScoringError::BadScoreFile {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != "opinion_id,sent_id,fsd" {
            return Err(ScoringError::BadScoreFile {
                line: 1,
                message: format!("expected header opinion_id,sent_id,fsd, found {header:?}"),
            });
        }
        let mut scores = HashMap::new();
        for (i, row) in csv_reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| ScoringError::BadScoreFile {
                line,
                message: e.to_string(),
            })?;
            if row.len() != 3 {
                return Err(ScoringError::BadScoreFile {
                    line,
                    message: format!("expected 3 fields, found {}", row.len()),
                });
            }
            let sent_id: usize = row[1].parse().map_err(|_| ScoringError::BadScoreFile {
                line,
                message: format!("invalid sent_id {:?}", &row[1]),
            })?;
            let fsd: f64 = row[2].parse().map_err(|_| ScoringError::BadScoreFile {
                line,
                message: format!("invalid fsd {:?}", &row[2]),
            })?;
            if !(0.0..=1.0).contains(&fsd) {
                return Err(ScoringError::BadScoreFile {
                    line,
                    message: format!("fsd {fsd} outside [0,1]"),
                });
            }
            scores.insert((row[0].to_string(), sent_id), fsd);
        }
        Ok(Self { scores })
    }

    pub fn load(path: &Path) -> Result<Self, ScoringError> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn get(&self, opinion_id: &str, sent_id: usize) -> Option<f64> {
        self.scores.get(&(opinion_id.to_string(), sent_id)).copied()
    }
}

/// How sentence-level FSD values are obtained.
#[derive(Debug, Clone)]
pub enum FsdProvider {
    /// Sentences already carry fsd; applying verifies completeness.
    Embedded,
    /// Look every (opinion_id, sent_id) up in a score table.
    ScoreFile(ScoreTable),
    /// Deterministic lexicon baseline computed from sentence text.
    Lexicon(Lexicon),
}

/// Returns the opinion with fsd populated on every sentence.
pub fn apply_provider(op: &Opinion, provider: &FsdProvider) -> Result<Opinion, ScoringError> {
    let mut scored = op.clone();
    for sentence in &mut scored.sentences {
        match provider {
            FsdProvider::Embedded => {
                if sentence.fsd.is_none() {
                    return Err(ScoringError::MissingFsd {
                        opinion_id: op.opinion_id.clone(),
                        sent_id: sentence.sent_id,
                    });
                }
            }
            FsdProvider::ScoreFile(table) => {
                let fsd = table.get(&op.opinion_id, sentence.sent_id).ok_or_else(|| {
                    ScoringError::MissingScoreEntry {
                        opinion_id: op.opinion_id.clone(),
                        sent_id: sentence.sent_id,
                    }
                })?;
                sentence.fsd = Some(fsd);
            }
            FsdProvider::Lexicon(lexicon) => {
                sentence.fsd = Some(lexicon_fsd(&sentence.text, lexicon));
            }
        }
    }
    Ok(scored)
}

/// The aggregation strategies, named exactly as on the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    AllSent,
    AllArg,
    ClaimOnly,
    PremiseOnly,
    KeyPremise,
    ExpertLike,
    ExpertLikeFsd,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::AllSent,
        Strategy::AllArg,
        Strategy::ClaimOnly,
        Strategy::PremiseOnly,
        Strategy::KeyPremise,
        Strategy::ExpertLike,
        Strategy::ExpertLikeFsd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::AllSent => "AllSent",
            Strategy::AllArg => "AllArg",
            Strategy::ClaimOnly => "ClaimOnly",
            Strategy::PremiseOnly => "PremiseOnly",
            Strategy::KeyPremise => "KeyPremise",
            Strategy::ExpertLike => "ExpertLike",
            Strategy::ExpertLikeFsd => "ExpertLikeFsd",
        }
    }

    /// True when the strategy needs fsd on every sentence before scoring.
    pub fn needs_fsd(&self) -> bool {
        !matches!(self, Strategy::ExpertLike)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|strategy| strategy.as_str() == s)
            .ok_or_else(|| ScoringError::UnknownStrategy(s.to_string()))
    }
}

/// Opinion-level score under one strategy. `defined=false` (and score 0)
/// marks an empty eligible sentence set; such opinions rank below every
/// defined score.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyScore {
    pub opinion_id: String,
    pub strategy: Strategy,
    pub score: f64,
    pub defined: bool,
}

impl StrategyScore {
    pub fn defined(opinion_id: impl Into<String>, strategy: Strategy, score: f64) -> Self {
        Self {
            opinion_id: opinion_id.into(),
            strategy,
            score,
            defined: true,
        }
    }

    pub fn undefined(opinion_id: impl Into<String>, strategy: Strategy) -> Self {
        Self {
            opinion_id: opinion_id.into(),
            strategy,
            score: 0.0,
            defined: false,
        }
    }
}

fn require_fsd(op: &Opinion) -> Result<(), ScoringError> {
    for sentence in &op.sentences {
        if sentence.fsd.is_none() {
            return Err(ScoringError::MissingFsd {
                opinion_id: op.opinion_id.clone(),
                sent_id: sentence.sent_id,
            });
        }
    }
    Ok(())
}

fn mean_fsd<'a>(
    op: &Opinion,
    strategy: Strategy,
    eligible: impl Iterator<Item = &'a crate::model::Sentence>,
) -> StrategyScore {
    let mut sum = 0.0;
    let mut count = 0usize;
    for sentence in eligible {
        sum += sentence.fsd.expect("fsd presence checked before aggregation");
        count += 1;
    }
    if count == 0 {
        StrategyScore::undefined(op.opinion_id.clone(), strategy)
    } else {
        StrategyScore::defined(op.opinion_id.clone(), strategy, sum / count as f64)
    }
}

/// Aggregates sentence scores into the opinion-level score for one strategy.
///
/// Eligible sets per strategy: all sentences (AllSent), claims and premises
/// (AllArg), claims (ClaimOnly), premises (PremiseOnly), premises linked to a
/// claim (KeyPremise, which takes the max instead of the mean), expert-like
/// sentences (ExpertLike counts them; ExpertLikeFsd averages their fsd).
pub fn score_opinion(op: &Opinion, strategy: Strategy) -> Result<StrategyScore, ScoringError> {
    if strategy.needs_fsd() {
        require_fsd(op)?;
    }
    let score = match strategy {
        Strategy::AllSent => mean_fsd(op, strategy, op.sentences.iter()),
        Strategy::AllArg => mean_fsd(
            op,
            strategy,
            op.sentences
                .iter()
                .filter(|s| matches!(s.label, ArgLabel::Claim | ArgLabel::Premise)),
        ),
        Strategy::ClaimOnly => mean_fsd(
            op,
            strategy,
            op.sentences.iter().filter(|s| s.label == ArgLabel::Claim),
        ),
        Strategy::PremiseOnly => mean_fsd(
            op,
            strategy,
            op.sentences.iter().filter(|s| s.label == ArgLabel::Premise),
        ),
        Strategy::KeyPremise => {
            let claims: std::collections::BTreeSet<usize> = op
                .sentences
                .iter()
                .filter(|s| s.label == ArgLabel::Claim)
                .map(|s| s.sent_id)
                .collect();
            let best = op
                .sentences
                .iter()
                .filter(|s| {
                    s.label == ArgLabel::Premise
                        && s.supports.iter().any(|target| claims.contains(target))
                })
                .map(|s| s.fsd.expect("fsd presence checked before aggregation"))
                .fold(None, |acc: Option<f64>, fsd| {
                    Some(acc.map_or(fsd, |best| best.max(fsd)))
                });
            match best {
                Some(max) => StrategyScore::defined(op.opinion_id.clone(), strategy, max),
                None => StrategyScore::undefined(op.opinion_id.clone(), strategy),
            }
        }
        Strategy::ExpertLike => {
            let count = op.sentences.iter().filter(|s| s.expert_like).count();
            if count == 0 {
                StrategyScore::undefined(op.opinion_id.clone(), strategy)
            } else {
                StrategyScore::defined(op.opinion_id.clone(), strategy, count as f64)
            }
        }
        Strategy::ExpertLikeFsd => {
            mean_fsd(op, strategy, op.sentences.iter().filter(|s| s.expert_like))
        }
    };
    Ok(score)
}

pub const STRATEGY_SCORES_HEADER: &str = "opinion_id,strategy,score,defined";

/// Writes `strategy_scores.csv` rows in the given order.
pub fn write_strategy_scores(scores: &[StrategyScore], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{STRATEGY_SCORES_HEADER}")?;
    for s in scores {
        writeln!(
            out,
            "{},{},{},{}",
            s.opinion_id, s.strategy, s.score, s.defined
        )?;
    }
    Ok(())
}

/// Reads `strategy_scores.csv`, grouped per strategy in file order.
pub fn read_strategy_scores(
    reader: impl Read,
) -> Result<BTreeMap<Strategy, Vec<StrategyScore>>, ScoringError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let header = csv_reader
        .headers()
        .map_err(|e| ScoringError::BadScoreFile {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != STRATEGY_SCORES_HEADER {
        return Err(ScoringError::BadScoreFile {
            line: 1,
            message: format!("expected header {STRATEGY_SCORES_HEADER:?}, found {header:?}"),
        });
    }
    let mut grouped: BTreeMap<Strategy, Vec<StrategyScore>> = BTreeMap::new();
    for (i, row) in csv_reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| ScoringError::BadScoreFile {
            line,
            message: e.to_string(),
        })?;
        if row.len() != 4 {
            return Err(ScoringError::BadScoreFile {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let strategy: Strategy = row[1].parse()?;
        let score: f64 = row[2].parse().map_err(|_| ScoringError::BadScoreFile {
            line,
            message: format!("invalid score {:?}", &row[2]),
        })?;
        if !score.is_finite() {
            return Err(ScoringError::BadScoreFile {
                line,
                message: format!("non-finite score {score}"),
            });
        }
        let defined: bool = row[3].parse().map_err(|_| ScoringError::BadScoreFile {
            line,
            message: format!("invalid defined flag {:?}", &row[3]),
        })?;
        if !defined && score != 0.0 {
            return Err(ScoringError::BadScoreFile {
                line,
                message: format!("undefined score must be 0, found {score}"),
            });
        }
        grouped.entry(strategy).or_default().push(StrategyScore {
            opinion_id: row[0].to_string(),
            strategy,
            score,
            defined,
        });
    }
    Ok(grouped)
}
