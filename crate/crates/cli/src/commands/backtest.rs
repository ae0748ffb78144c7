use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use oprank_core::backtest::{backtest_corpus, write_outcomes, BacktestConfig, EquationMode};
use oprank_core::ingest::{self, CorpusBundle};

use super::{report_rejections, require_calendar};
use crate::manifest::RunManifest;

pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const SKIPS_FILE: &str = "backtest_skips.csv";

pub fn run(
    opinions_path: &Path,
    prices_path: &Path,
    horizon: usize,
    equation_mode: &str,
    calendar_path: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let Some(mode) = EquationMode::parse(equation_mode) else {
        bail!("unknown --equation-mode {equation_mode:?} (expected profit-consistent or literal)");
    };
    if horizon == 0 {
        bail!("--horizon must be at least 1");
    }
    let calendar = require_calendar(calendar_path)?;
    let opinions = ingest::load_opinions(opinions_path, &calendar)
        .with_context(|| format!("loading {}", opinions_path.display()))?;
    report_rejections("opinions", &opinions.rejections);
    let prices = ingest::load_prices(prices_path, &calendar)
        .with_context(|| format!("loading {}", prices_path.display()))?;
    report_rejections("prices", &prices.rejections);

    let bundle = CorpusBundle {
        calendar,
        opinions: opinions.value,
        prices: prices.value,
        analyst_events: vec![],
        flows: vec![],
    };
    let cfg = BacktestConfig {
        horizon_days: horizon,
        equation_mode: mode,
    };
    let (outcomes, skipped) = backtest_corpus(&bundle, &cfg);

    let outcomes_path = out.join(OUTCOMES_FILE);
    let mut writer = super::create_buffered(&outcomes_path)?;
    write_outcomes(&outcomes, &mut writer)
        .with_context(|| format!("writing {}", outcomes_path.display()))?;
    writer.flush()?;

    let skips_path = out.join(SKIPS_FILE);
    let mut skips_file = super::create_buffered(&skips_path)?;
    writeln!(skips_file, "opinion_id,stock_id,reason")?;
    for skip in &skipped {
        writeln!(
            skips_file,
            "{},{},{}",
            skip.opinion_id,
            skip.stock_id,
            skip.reason.replace(',', ";")
        )?;
        eprintln!("backtest: skipped {} ({})", skip.opinion_id, skip.reason);
    }
    skips_file.flush()?;

    RunManifest::new("backtest", out)
        .input("opinions", Some(opinions_path))
        .input("prices", Some(prices_path))
        .input("calendar", calendar_path)
        .param("horizon_days", horizon)
        .param("equation_mode", mode.as_str())
        .write(out)?;

    println!(
        "backtested {} opinions ({} skipped) -> {}",
        outcomes.len(),
        skipped.len(),
        outcomes_path.display()
    );
    Ok(())
}
