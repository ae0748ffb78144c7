//! Professional reactions to ranked opinions: the analyst view-change ratio
//! (P_ANA) and the institutional concurring ratio (CR), reported per decile.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use thiserror::Error;

use crate::evaluation::{DecilePartition, Ranking};
use crate::ingest::CorpusBundle;
use crate::model::{AnalystEvent, EventKind, FlowCategory, FlowRecord, Opinion, Stance};
use crate::scoring::Strategy;

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("invalid window: need 1 <= start <= end, got start={start}, end={end}")]
    BadWindow { start: usize, end: usize },
    #[error("empty decile")]
    EmptyDecile,
    #[error("ranked opinion {0} not present in the bundle")]
    MissingOpinion(String),
}

/// Trading-day offsets for both behavior measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorConfig {
    /// First day of the analyst window, as an offset from release (t+start).
    pub ana_window_start: usize,
    /// Last day of the analyst window (t+end), inclusive.
    pub ana_window_end: usize,
    /// Day the flow direction is checked (t+offset).
    pub cr_offset: usize,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            ana_window_start: 1,
            ana_window_end: 6,
            cr_offset: 1,
        }
    }
}

impl BehaviorConfig {
    pub fn validate(&self) -> Result<(), BehaviorError> {
        if self.ana_window_start < 1 || self.ana_window_start > self.ana_window_end {
            return Err(BehaviorError::BadWindow {
                start: self.ana_window_start,
                end: self.ana_window_end,
            });
        }
        Ok(())
    }
}

/// View-change days per stock, sorted, for window lookups.
struct EventIndex<'a> {
    view_changes: HashMap<&'a str, Vec<usize>>,
}

impl<'a> EventIndex<'a> {
    fn build(events: &'a [AnalystEvent]) -> Self {
        let mut view_changes: HashMap<&'a str, Vec<usize>> = HashMap::new();
        for e in events {
            if e.kind == EventKind::ViewChange {
                view_changes.entry(e.stock_id.as_str()).or_default().push(e.day.index);
            }
        }
        for days in view_changes.values_mut() {
            days.sort_unstable();
        }
        Self { view_changes }
    }

    fn any_in_window(&self, op: &Opinion, cfg: &BehaviorConfig) -> bool {
        let lo = op.release_day.index + cfg.ana_window_start;
        let hi = op.release_day.index + cfg.ana_window_end;
        self.view_changes
            .get(op.stock_id.as_str())
            .map(|days| {
                let start = days.partition_point(|&d| d < lo);
                days.get(start).is_some_and(|&d| d <= hi)
            })
            .unwrap_or(false)
    }
}

/// Net units summed per (stock, day, category).
struct FlowIndex<'a> {
    nets: HashMap<(&'a str, usize, FlowCategory), i64>,
}

impl<'a> FlowIndex<'a> {
    fn build(flows: &'a [FlowRecord]) -> Self {
        let mut nets: HashMap<(&'a str, usize, FlowCategory), i64> = HashMap::new();
        for f in flows {
            *nets
                .entry((f.stock_id.as_str(), f.day.index, f.category))
                .or_default() += f.net_units;
        }
        Self { nets }
    }

    fn concurs(&self, op: &Opinion, category: FlowCategory, cfg: &BehaviorConfig) -> bool {
        let key = (op.stock_id.as_str(), op.release_day.index + cfg.cr_offset, category);
        let net = self.nets.get(&key).copied().unwrap_or(0);
        match op.stance {
            Stance::Bullish => net > 0,
            Stance::Bearish => net < 0,
        }
    }
}

/// Fraction of opinions followed by at least one analyst view change on the
/// same stock within the configured window.
pub fn p_ana(
    decile_opinions: &[&Opinion],
    events: &[AnalystEvent],
    cfg: &BehaviorConfig,
) -> Result<f64, BehaviorError> {
    cfg.validate()?;
    if decile_opinions.is_empty() {
        return Err(BehaviorError::EmptyDecile);
    }
    let index = EventIndex::build(events);
    let matched = decile_opinions
        .iter()
        .filter(|op| index.any_in_window(op, cfg))
        .count();
    Ok(matched as f64 / decile_opinions.len() as f64)
}

/// Fraction of opinions where the category's summed net flow on day
/// t+cr_offset agrees in direction with the stance. A missing record or a
/// zero net counts as non-concurring.
pub fn concurring_ratio(
    decile_opinions: &[&Opinion],
    flows: &[FlowRecord],
    category: FlowCategory,
    cfg: &BehaviorConfig,
) -> Result<f64, BehaviorError> {
    cfg.validate()?;
    if decile_opinions.is_empty() {
        return Err(BehaviorError::EmptyDecile);
    }
    let index = FlowIndex::build(flows);
    let matched = decile_opinions
        .iter()
        .filter(|op| index.concurs(op, category, cfg))
        .count();
    Ok(matched as f64 / decile_opinions.len() as f64)
}

/// The integer counts backing one decile's ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorCounts {
    pub n: usize,
    pub ana_matched: usize,
    pub cr_matched: BTreeMap<FlowCategory, usize>,
}

/// Behavior ratios for one decile of one strategy's ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorReport {
    pub strategy: Strategy,
    pub decile: usize,
    pub p_ana: f64,
    pub cr_by_category: BTreeMap<FlowCategory, f64>,
    pub counts: BehaviorCounts,
}

/// Computes one report per non-empty decile, top (10th) decile first,
/// using the same partition rule as the decile evaluation.
pub fn behavior_report(
    ranking: &Ranking,
    bundle: &CorpusBundle,
    cfg: &BehaviorConfig,
) -> Result<Vec<BehaviorReport>, BehaviorError> {
    cfg.validate()?;
    let by_id: HashMap<&str, &Opinion> = bundle
        .opinions
        .iter()
        .map(|op| (op.opinion_id.as_str(), op))
        .collect();
    let ranked: Vec<&Opinion> = ranking
        .ordered
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| BehaviorError::MissingOpinion(id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let events = EventIndex::build(&bundle.analyst_events);
    let flows = FlowIndex::build(&bundle.flows);
    let partition = DecilePartition::new(ranked.len());
    let mut reports = Vec::new();
    for decile in (1..=10).rev() {
        let block = partition.block(decile);
        if block.is_empty() {
            continue;
        }
        let members = &ranked[block];
        let n = members.len();
        let ana_matched = members
            .iter()
            .filter(|op| events.any_in_window(op, cfg))
            .count();
        let mut cr_by_category = BTreeMap::new();
        let mut cr_matched = BTreeMap::new();
        for category in FlowCategory::ALL {
            let matched = members
                .iter()
                .filter(|op| flows.concurs(op, category, cfg))
                .count();
            cr_matched.insert(category, matched);
            cr_by_category.insert(category, matched as f64 / n as f64);
        }
        reports.push(BehaviorReport {
            strategy: ranking.strategy,
            decile,
            p_ana: ana_matched as f64 / n as f64,
            cr_by_category,
            counts: BehaviorCounts {
                n,
                ana_matched,
                cr_matched,
            },
        });
    }
    Ok(reports)
}

pub const BEHAVIOR_HEADER: &str = "strategy,decile,p_ana,cr_qfii,cr_fund,cr_dealer,n";

pub fn write_behavior(reports: &[BehaviorReport], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{BEHAVIOR_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy,
            r.decile,
            r.p_ana,
            r.cr_by_category[&FlowCategory::Qfii],
            r.cr_by_category[&FlowCategory::Fund],
            r.cr_by_category[&FlowCategory::Dealer],
            r.counts.n
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Calendar, Sentence, Source, TradingDay};
    use chrono::NaiveDate;

    fn calendar(n: usize) -> Calendar {
        let base: NaiveDate = "2020-01-01".parse().unwrap();
        Calendar::from_dates((0..n).map(|i| base + chrono::Days::new(i as u64)).collect()).unwrap()
    }

    fn opinion(id: &str, stock: &str, release: TradingDay, stance: Stance) -> Opinion {
        Opinion {
            opinion_id: id.into(),
            stock_id: stock.into(),
            release_day: release,
            stance,
            source: Source::Professional,
            price_target: None,
            sentences: vec![Sentence::new(0, "s").with_fsd(0.5)],
        }
    }

    fn view_change(stock: &str, day: TradingDay) -> AnalystEvent {
        AnalystEvent {
            stock_id: stock.into(),
            day,
            analyst_id: "an-1".into(),
            kind: EventKind::ViewChange,
        }
    }

    fn flow(stock: &str, day: TradingDay, category: FlowCategory, net: i64) -> FlowRecord {
        FlowRecord {
            stock_id: stock.into(),
            day,
            category,
            net_units: net,
        }
    }

    #[test]
    fn p_ana_counts_matched_opinions() {
        let cal = calendar(20);
        let t = cal.at(0).unwrap();
        let ops = [
            opinion("a", "S1", t, Stance::Bullish),
            opinion("b", "S2", t, Stance::Bullish),
            opinion("c", "S3", t, Stance::Bearish),
            opinion("d", "S4", t, Stance::Bearish),
        ];
        // S1 in window (t+2), S3 in window (t+6); S2 out of window (t+7); S4 none
        let events = vec![
            view_change("S1", cal.at(2).unwrap()),
            view_change("S3", cal.at(6).unwrap()),
            view_change("S2", cal.at(7).unwrap()),
        ];
        let refs: Vec<&Opinion> = ops.iter().collect();
        let ratio = p_ana(&refs, &events, &BehaviorConfig::default()).unwrap();
        assert_eq!(ratio, 0.5);
    }

    #[test]
    fn p_ana_edges() {
        let cal = calendar(20);
        let t = cal.at(0).unwrap();
        let ops = [opinion("a", "S1", t, Stance::Bullish)];
        let refs: Vec<&Opinion> = ops.iter().collect();
        let cfg = BehaviorConfig::default();

        assert_eq!(p_ana(&refs, &[], &cfg).unwrap(), 0.0);

        let events = vec![view_change("S1", cal.at(1).unwrap())];
        assert_eq!(p_ana(&refs, &events, &cfg).unwrap(), 1.0);

        // view changes of kind "other" never count
        let other = vec![AnalystEvent {
            kind: EventKind::Other,
            ..view_change("S1", cal.at(1).unwrap())
        }];
        assert_eq!(p_ana(&refs, &other, &cfg).unwrap(), 0.0);

        assert_eq!(p_ana(&[], &events, &cfg), Err(BehaviorError::EmptyDecile));
    }

    #[test]
    fn out_of_window_events_never_change_p_ana() {
        let cal = calendar(20);
        let t = cal.at(0).unwrap();
        let ops = [opinion("a", "S1", t, Stance::Bullish)];
        let refs: Vec<&Opinion> = ops.iter().collect();
        let cfg = BehaviorConfig::default();
        let mut events = vec![view_change("S1", cal.at(3).unwrap())];
        let before = p_ana(&refs, &events, &cfg).unwrap();
        // same day as release (t+0) and past the window (t+7)
        events.push(view_change("S1", cal.at(0).unwrap()));
        events.push(view_change("S1", cal.at(7).unwrap()));
        assert_eq!(p_ana(&refs, &events, &cfg).unwrap(), before);
    }

    #[test]
    fn concurring_ratio_checks_sign_against_stance() {
        let cal = calendar(10);
        let t = cal.at(0).unwrap();
        let next = cal.at(1).unwrap();
        let cfg = BehaviorConfig::default();

        let bull = [opinion("a", "S1", t, Stance::Bullish)];
        let refs: Vec<&Opinion> = bull.iter().collect();
        let flows = vec![flow("S1", next, FlowCategory::Qfii, 500)];
        assert_eq!(concurring_ratio(&refs, &flows, FlowCategory::Qfii, &cfg).unwrap(), 1.0);

        let bear = [opinion("b", "S2", t, Stance::Bearish)];
        let refs: Vec<&Opinion> = bear.iter().collect();
        let flows = vec![flow("S2", next, FlowCategory::Dealer, 200)];
        assert_eq!(
            concurring_ratio(&refs, &flows, FlowCategory::Dealer, &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn concurring_ratio_two_thirds_fixture() {
        let cal = calendar(10);
        let t = cal.at(0).unwrap();
        let next = cal.at(1).unwrap();
        let ops = [
            opinion("a", "S1", t, Stance::Bullish),
            opinion("b", "S2", t, Stance::Bullish),
            opinion("c", "S3", t, Stance::Bearish),
        ];
        let flows = vec![
            flow("S1", next, FlowCategory::Fund, 100),  // concur
            flow("S2", next, FlowCategory::Fund, -100), // against bullish
            flow("S3", next, FlowCategory::Fund, -50),  // concur
        ];
        let refs: Vec<&Opinion> = ops.iter().collect();
        let ratio =
            concurring_ratio(&refs, &flows, FlowCategory::Fund, &BehaviorConfig::default()).unwrap();
        assert!((ratio - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_missing_nets_do_not_concur_and_same_day_flows_sum() {
        let cal = calendar(10);
        let t = cal.at(0).unwrap();
        let next = cal.at(1).unwrap();
        let cfg = BehaviorConfig::default();
        let ops = [opinion("a", "S1", t, Stance::Bullish)];
        let refs: Vec<&Opinion> = ops.iter().collect();

        // no record at all
        assert_eq!(concurring_ratio(&refs, &[], FlowCategory::Qfii, &cfg).unwrap(), 0.0);
        // explicit zero
        let flows = vec![flow("S1", next, FlowCategory::Qfii, 0)];
        assert_eq!(concurring_ratio(&refs, &flows, FlowCategory::Qfii, &cfg).unwrap(), 0.0);
        // +800 and -500 on the same day net to +300: concurring
        let flows = vec![
            flow("S1", next, FlowCategory::Qfii, 800),
            flow("S1", next, FlowCategory::Qfii, -500),
        ];
        assert_eq!(concurring_ratio(&refs, &flows, FlowCategory::Qfii, &cfg).unwrap(), 1.0);
        // flows on any other day never matter
        let flows = vec![
            flow("S1", cal.at(2).unwrap(), FlowCategory::Qfii, 900),
            flow("S1", t, FlowCategory::Qfii, 900),
        ];
        assert_eq!(concurring_ratio(&refs, &flows, FlowCategory::Qfii, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn permuting_opinions_within_a_decile_preserves_ratios() {
        let cal = calendar(10);
        let t = cal.at(0).unwrap();
        let next = cal.at(1).unwrap();
        let ops = [
            opinion("a", "S1", t, Stance::Bullish),
            opinion("b", "S2", t, Stance::Bearish),
            opinion("c", "S3", t, Stance::Bullish),
        ];
        let events = vec![view_change("S2", cal.at(3).unwrap())];
        let flows = vec![
            flow("S1", next, FlowCategory::Fund, 10),
            flow("S3", next, FlowCategory::Fund, -10),
        ];
        let cfg = BehaviorConfig::default();
        let forward: Vec<&Opinion> = ops.iter().collect();
        let backward: Vec<&Opinion> = ops.iter().rev().collect();
        assert_eq!(
            p_ana(&forward, &events, &cfg).unwrap(),
            p_ana(&backward, &events, &cfg).unwrap()
        );
        assert_eq!(
            concurring_ratio(&forward, &flows, FlowCategory::Fund, &cfg).unwrap(),
            concurring_ratio(&backward, &flows, FlowCategory::Fund, &cfg).unwrap()
        );
    }

    #[test]
    fn window_config_is_validated() {
        let bad = BehaviorConfig {
            ana_window_start: 0,
            ana_window_end: 6,
            cr_offset: 1,
        };
        assert_eq!(bad.validate(), Err(BehaviorError::BadWindow { start: 0, end: 6 }));
        let inverted = BehaviorConfig {
            ana_window_start: 4,
            ana_window_end: 2,
            cr_offset: 1,
        };
        assert!(inverted.validate().is_err());
    }

    fn bundle_of(ops: Vec<Opinion>, events: Vec<AnalystEvent>, flows: Vec<FlowRecord>) -> CorpusBundle {
        CorpusBundle {
            calendar: calendar(20),
            opinions: ops,
            prices: BTreeMap::new(),
            analyst_events: events,
            flows,
        }
    }

    fn ranking_of(ids: &[&str]) -> Ranking {
        // scores descend in listed order
        let scores = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                crate::scoring::StrategyScore::defined(
                    *id,
                    Strategy::AllSent,
                    1.0 - i as f64 / ids.len() as f64,
                )
            })
            .collect();
        crate::evaluation::rank(scores).unwrap()
    }

    #[test]
    fn behavior_report_partitions_twenty_opinions_into_ten_deciles() {
        let cal = calendar(20);
        let t = cal.at(0).unwrap();
        let next = cal.at(1).unwrap();
        let ids: Vec<String> = (0..20).map(|i| format!("op-{i:02}")).collect();
        let ops: Vec<Opinion> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| opinion(id, &format!("S{i}"), t, Stance::Bullish))
            .collect();
        // every stock gets a concurring flow for every category
        let flows: Vec<FlowRecord> = (0..20)
            .flat_map(|i| {
                FlowCategory::ALL.map(|c| flow(&format!("S{i}"), next, c, 10))
            })
            .collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let ranking = ranking_of(&id_refs);
        let bundle = bundle_of(ops, vec![], flows);
        let reports = behavior_report(&ranking, &bundle, &BehaviorConfig::default()).unwrap();
        assert_eq!(reports.len(), 10);
        assert_eq!(reports[0].decile, 10);
        assert_eq!(reports[9].decile, 1);
        for r in &reports {
            assert_eq!(r.counts.n, 2);
            assert_eq!(r.p_ana, 0.0);
            for category in FlowCategory::ALL {
                assert_eq!(r.cr_by_category[&category], 1.0);
                assert_eq!(r.counts.cr_matched[&category], 2);
            }
        }
    }

    #[test]
    fn events_only_for_top_stocks_show_up_only_in_the_tenth_decile() {
        let cal = calendar(20);
        let t = cal.at(0).unwrap();
        let ids: Vec<String> = (0..20).map(|i| format!("op-{i:02}")).collect();
        let ops: Vec<Opinion> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| opinion(id, &format!("S{i}"), t, Stance::Bullish))
            .collect();
        // ranking_of ranks in id order, so the 10th decile holds op-00, op-01
        let events = vec![
            view_change("S0", cal.at(2).unwrap()),
            view_change("S1", cal.at(3).unwrap()),
        ];
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let ranking = ranking_of(&id_refs);
        let bundle = bundle_of(ops, events, vec![]);
        let reports = behavior_report(&ranking, &bundle, &BehaviorConfig::default()).unwrap();
        assert_eq!(reports[0].p_ana, 1.0);
        for r in &reports[1..] {
            assert_eq!(r.p_ana, 0.0);
        }
    }

    #[test]
    fn ranked_opinion_missing_from_bundle_is_an_error() {
        let ranking = ranking_of(&["ghost"]);
        let bundle = bundle_of(vec![], vec![], vec![]);
        assert_eq!(
            behavior_report(&ranking, &bundle, &BehaviorConfig::default()),
            Err(BehaviorError::MissingOpinion("ghost".into()))
        );
    }

    #[test]
    fn behavior_csv_layout() {
        let report = BehaviorReport {
            strategy: Strategy::KeyPremise,
            decile: 10,
            p_ana: 0.5,
            cr_by_category: FlowCategory::ALL.map(|c| (c, 0.25)).into(),
            counts: BehaviorCounts {
                n: 4,
                ana_matched: 2,
                cr_matched: FlowCategory::ALL.map(|c| (c, 1)).into(),
            },
        };
        let mut buf = Vec::new();
        write_behavior(&[report], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "strategy,decile,p_ana,cr_qfii,cr_fund,cr_dealer,n\nKeyPremise,10,0.5,0.25,0.25,0.25,4\n"
        );
    }
}
