use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use oprank_core::behavior::{behavior_report, write_behavior, BehaviorConfig, BehaviorReport};
use oprank_core::evaluation::rank;
use oprank_core::ingest::{self, CorpusBundle};
use oprank_core::scoring::read_strategy_scores;

use super::{report_rejections, require_calendar};
use crate::manifest::RunManifest;

pub const BEHAVIOR_FILE: &str = "behavior.csv";

#[allow(clippy::too_many_arguments)]
pub fn run(
    scores_path: &Path,
    opinions_path: &Path,
    events_path: &Path,
    flows_path: &Path,
    ana_start: usize,
    ana_end: usize,
    cr_offset: usize,
    calendar_path: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let calendar = require_calendar(calendar_path)?;
    let opinions = ingest::load_opinions(opinions_path, &calendar)
        .with_context(|| format!("loading {}", opinions_path.display()))?;
    report_rejections("opinions", &opinions.rejections);
    let events = ingest::load_analyst_events(events_path, &calendar)
        .with_context(|| format!("loading {}", events_path.display()))?;
    report_rejections("analyst_events", &events.rejections);
    let flows = ingest::load_flows(flows_path, &calendar)
        .with_context(|| format!("loading {}", flows_path.display()))?;
    report_rejections("flows", &flows.rejections);

    let bundle = CorpusBundle {
        calendar,
        opinions: opinions.value,
        prices: Default::default(),
        analyst_events: events.value,
        flows: flows.value,
    };
    let cfg = BehaviorConfig {
        ana_window_start: ana_start,
        ana_window_end: ana_end,
        cr_offset,
    };

    let grouped = read_strategy_scores(File::open(scores_path)?)
        .with_context(|| format!("reading {}", scores_path.display()))?;
    let mut reports: Vec<BehaviorReport> = Vec::new();
    for scores in grouped.values() {
        let ranking = rank(scores.clone())?;
        reports.extend(behavior_report(&ranking, &bundle, &cfg)?);
    }

    let path = out.join(BEHAVIOR_FILE);
    let mut writer = super::create_buffered(&path)?;
    write_behavior(&reports, &mut writer)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.flush()?;

    RunManifest::new("behavior", out)
        .input("scores", Some(scores_path))
        .input("opinions", Some(opinions_path))
        .input("events", Some(events_path))
        .input("flows", Some(flows_path))
        .input("calendar", calendar_path)
        .param("ana_window_start", ana_start)
        .param("ana_window_end", ana_end)
        .param("cr_offset", cr_offset)
        .param(
            "strategies",
            grouped
                .keys()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(","),
        )
        .write(out)?;

    println!(
        "behavior ratios for {} strategies -> {}",
        grouped.len(),
        path.display()
    );
    Ok(())
}
