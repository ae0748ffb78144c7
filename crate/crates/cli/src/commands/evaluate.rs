use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use oprank_core::backtest::{read_outcomes, OutcomeRow};
use oprank_core::evaluation::{
    decile_report, decile_rows, friedman_from_rankings, ndcg, rank, top_k_report, write_report,
    EvalError, Metric, Ranking, ReportRow,
};
use oprank_core::scoring::{read_strategy_scores, StrategyScore};

use crate::manifest::RunManifest;

pub const REPORT_FILE: &str = "report.csv";
pub const SKIPS_FILE: &str = "evaluate_skips.csv";

pub fn run(
    scores_path: &Path,
    outcomes_path: &Path,
    topk: &[usize],
    with_ndcg: bool,
    ndcg_cutoff: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let grouped = read_strategy_scores(File::open(scores_path)?)
        .with_context(|| format!("reading {}", scores_path.display()))?;
    let outcomes = read_outcomes(File::open(outcomes_path)?)
        .with_context(|| format!("reading {}", outcomes_path.display()))?;

    let mut rows: Vec<ReportRow> = Vec::new();
    let mut skipped: Vec<(String, String)> = Vec::new();
    let mut rankings: Vec<Ranking> = Vec::new();

    for (strategy, scores) in &grouped {
        // scored opinions without a backtest outcome are reported, not fatal
        let (kept, missing): (Vec<StrategyScore>, Vec<StrategyScore>) = scores
            .iter()
            .cloned()
            .partition(|s| outcomes.contains_key(&s.opinion_id));
        for s in missing {
            skipped.push((strategy.to_string(), s.opinion_id));
        }
        if kept.is_empty() {
            eprintln!("evaluate: no backtested opinions for {strategy}, skipping");
            continue;
        }
        let ranking = rank(kept)?;

        let metric_values = |metric: Metric| -> BTreeMap<String, f64> {
            ranking
                .ordered
                .iter()
                .map(|id| {
                    let row: &OutcomeRow = &outcomes[id];
                    let value = match metric {
                        Metric::Mpp => row.mpp,
                        Metric::Ml => row.ml,
                    };
                    (id.clone(), value)
                })
                .collect()
        };

        for metric in [Metric::Mpp, Metric::Ml] {
            let values = metric_values(metric);
            let report = decile_report(&ranking, &values, metric)?;
            rows.extend(decile_rows(&report));
            for &k in topk {
                match top_k_report(&ranking, &values, k) {
                    Ok(mean) => rows.push(ReportRow {
                        strategy: strategy.to_string(),
                        metric: metric.as_str().to_string(),
                        kind: "topk".into(),
                        param: k.to_string(),
                        value: mean,
                    }),
                    Err(EvalError::BadTopK { k, n }) => {
                        eprintln!("evaluate: top-{k} skipped for {strategy} ({n} ranked opinions)");
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }

        if with_ndcg {
            // gains must be non-negative, so losses clamp to zero relevance
            let relevance: BTreeMap<String, f64> = metric_values(Metric::Mpp)
                .into_iter()
                .map(|(id, mpp)| (id, mpp.max(0.0)))
                .collect();
            match ndcg(&ranking, &relevance, ndcg_cutoff) {
                Ok(value) => rows.push(ReportRow {
                    strategy: strategy.to_string(),
                    metric: Metric::Mpp.as_str().to_string(),
                    kind: "ndcg".into(),
                    param: ndcg_cutoff.map_or_else(|| "all".into(), |c| c.to_string()),
                    value,
                }),
                Err(e @ EvalError::AllZeroRelevance) => {
                    eprintln!("evaluate: {e} for {strategy}");
                }
                Err(e) => return Err(e.into()),
            }
        }

        rankings.push(ranking);
    }

    if rankings.len() >= 2 {
        match friedman_from_rankings(&rankings) {
            Ok((statistic, p_value)) => {
                for (param, value) in [("statistic", statistic), ("p_value", p_value)] {
                    rows.push(ReportRow {
                        strategy: "*".into(),
                        metric: "rank".into(),
                        kind: "friedman".into(),
                        param: param.into(),
                        value,
                    });
                }
            }
            Err(e @ EvalError::RankingMismatch) => {
                eprintln!("evaluate: friedman test skipped: {e}");
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        eprintln!("evaluate: friedman test skipped: need >= 2 strategies");
    }

    let report_path = out.join(REPORT_FILE);
    let mut writer = super::create_buffered(&report_path)?;
    write_report(&rows, &mut writer)
        .with_context(|| format!("writing {}", report_path.display()))?;
    writer.flush()?;

    let skips_path = out.join(SKIPS_FILE);
    let mut skips_file = super::create_buffered(&skips_path)?;
    writeln!(skips_file, "strategy,opinion_id")?;
    for (strategy, opinion_id) in &skipped {
        writeln!(skips_file, "{strategy},{opinion_id}")?;
        eprintln!("evaluate: {opinion_id} has no outcome (strategy {strategy})");
    }
    skips_file.flush()?;

    RunManifest::new("evaluate", out)
        .input("scores", Some(scores_path))
        .input("outcomes", Some(outcomes_path))
        .param(
            "strategies",
            grouped
                .keys()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(","),
        )
        .param(
            "topk",
            topk.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        )
        .param("ndcg", with_ndcg)
        .param(
            "ndcg_cutoff",
            ndcg_cutoff.map_or_else(|| "all".into(), |c| c.to_string()),
        )
        .write(out)?;

    println!(
        "evaluated {} strategies ({} report rows) -> {}",
        grouped.len(),
        rows.len(),
        report_path.display()
    );
    Ok(())
}
