use std::io::Write;
use std::path::Path;

use anyhow::Context;
use oprank_core::ingest;
use oprank_core::scoring::{
    apply_provider, score_opinion, write_strategy_scores, FsdProvider, Lexicon, ScoreTable,
    Strategy, StrategyScore,
};

use super::{report_rejections, require_calendar};
use crate::manifest::RunManifest;

pub const SCORES_FILE: &str = "strategy_scores.csv";

pub fn run(
    opinions_path: &Path,
    scores_path: Option<&Path>,
    lexicon_path: Option<&Path>,
    strategy_names: &[String],
    calendar_path: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let calendar = require_calendar(calendar_path)?;
    let loaded = ingest::load_opinions(opinions_path, &calendar)
        .with_context(|| format!("loading {}", opinions_path.display()))?;
    report_rejections("opinions", &loaded.rejections);
    let opinions = loaded.value;

    let strategies: Vec<Strategy> = strategy_names
        .iter()
        .map(|name| name.parse::<Strategy>())
        .collect::<Result<_, _>>()?;

    let (provider, provider_name) = match (scores_path, lexicon_path) {
        (Some(path), None) => (FsdProvider::ScoreFile(ScoreTable::load(path)?), "scorefile"),
        (None, Some(path)) => (FsdProvider::Lexicon(Lexicon::load(path)?), "lexicon"),
        (None, None) => (FsdProvider::Embedded, "embedded"),
        (Some(_), Some(_)) => unreachable!("clap rejects --scores with --lexicon"),
    };

    // ExpertLike scores raw opinions; everything else needs fsd everywhere
    let needs_fsd = strategies.iter().any(Strategy::needs_fsd);
    let scored_opinions = if needs_fsd {
        Some(
            opinions
                .iter()
                .map(|op| apply_provider(op, &provider))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };

    let mut rows: Vec<StrategyScore> = Vec::with_capacity(opinions.len() * strategies.len());
    for &strategy in &strategies {
        let pool: &[oprank_core::Opinion] = if strategy.needs_fsd() {
            scored_opinions.as_ref().expect("populated when needed")
        } else {
            &opinions
        };
        for op in pool {
            rows.push(score_opinion(op, strategy)?);
        }
    }

    let path = out.join(SCORES_FILE);
    let mut writer = super::create_buffered(&path)?;
    write_strategy_scores(&rows, &mut writer)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.flush()?;

    RunManifest::new("score", out)
        .input("opinions", Some(opinions_path))
        .input("calendar", calendar_path)
        .input("scores", scores_path)
        .input("lexicon", lexicon_path)
        .param("provider", provider_name)
        .param(
            "strategies",
            strategies
                .iter()
                .map(Strategy::as_str)
                .collect::<Vec<_>>()
                .join(","),
        )
        .write(out)?;

    println!(
        "scored {} opinions under {} strategies -> {}",
        opinions.len(),
        strategies.len(),
        path.display()
    );
    Ok(())
}
