//! Ranking of scored opinions and evaluation of those rankings: decile
//! averages, top-K averages, nDCG, and the Friedman test across strategies.
//!
//! Deciles are numbered the way the source tables read: the 10th decile is
//! the top-ranked block, the 1st the bottom.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::Range;

use thiserror::Error;

use crate::scoring::{Strategy, StrategyScore};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("duplicate opinion_id {0}")]
    DuplicateOpinion(String),
    #[error("scores mix strategies: {0} and {1}")]
    MixedStrategies(Strategy, Strategy),
    #[error("no scores to rank")]
    EmptyScores,
    #[error("no outcome for ranked opinion {0}")]
    MissingOutcome(String),
    #[error("top-k domain error: k={k}, ranked={n}")]
    BadTopK { k: usize, n: usize },
    #[error("no relevance for ranked opinion {0}")]
    MissingRelevance(String),
    #[error("negative relevance {relevance} for opinion {opinion_id}")]
    NegativeRelevance { opinion_id: String, relevance: f64 },
    #[error("nDCG undefined: all relevances are zero")]
    AllZeroRelevance,
    #[error("nDCG cutoff must be positive")]
    ZeroCutoff,
    #[error("friedman test needs n >= 2 blocks and k >= 2 treatments, got n={n}, k={k}")]
    DegenerateMatrix { n: usize, k: usize },
    #[error("friedman matrix row {row} has wrong length")]
    RaggedMatrix { row: usize },
    #[error("rankings do not cover the same opinion set")]
    RankingMismatch,
}

/// Profit or risk metric selector for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mpp,
    Ml,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Mpp => "MPP",
            Metric::Ml => "ML",
        }
    }
}

/// Opinions ordered best-first under one strategy.
///
/// Defined scores sort by (score desc, opinion_id asc); undefined scores
/// trail every defined one, ordered by opinion id.
#[derive(Debug, Clone)]
pub struct Ranking {
    pub strategy: Strategy,
    pub ordered: Vec<String>,
    pub scores: Vec<StrategyScore>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    /// 1-based rank position of every opinion.
    pub fn positions(&self) -> BTreeMap<&str, usize> {
        self.ordered
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i + 1))
            .collect()
    }
}

/// Sorts strategy scores into a [`Ranking`].
pub fn rank(scores: Vec<StrategyScore>) -> Result<Ranking, EvalError> {
    let Some(first) = scores.first() else {
        return Err(EvalError::EmptyScores);
    };
    let strategy = first.strategy;
    let mut seen = BTreeSet::new();
    for s in &scores {
        if s.strategy != strategy {
            return Err(EvalError::MixedStrategies(strategy, s.strategy));
        }
        if !seen.insert(s.opinion_id.clone()) {
            return Err(EvalError::DuplicateOpinion(s.opinion_id.clone()));
        }
    }
    let mut sorted = scores;
    sorted.sort_by(|a, b| {
        b.defined
            .cmp(&a.defined)
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.opinion_id.cmp(&b.opinion_id))
    });
    let ordered = sorted.iter().map(|s| s.opinion_id.clone()).collect();
    Ok(Ranking {
        strategy,
        ordered,
        scores: sorted,
    })
}

/// Contiguous rank blocks forming the ten deciles of an n-element ranking.
///
/// Sizes differ by at most one; when n is not divisible by 10 the extra
/// elements go one per decile starting from the 10th (top) decile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecilePartition {
    n: usize,
    /// sizes[d - 1] = size of decile d.
    sizes: [usize; 10],
}

impl DecilePartition {
    pub fn new(n: usize) -> Self {
        let base = n / 10;
        let extra = n % 10;
        let mut sizes = [base; 10];
        // deciles 10, 9, .. (10 - extra + 1) each take one extra element
        for d in (10 - extra + 1)..=10 {
            sizes[d - 1] += 1;
        }
        Self { n, sizes }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self, decile: usize) -> usize {
        self.sizes[decile - 1]
    }

    /// Index range into the best-first ranking covered by `decile` (1..=10).
    pub fn block(&self, decile: usize) -> Range<usize> {
        // rank order starts at the 10th decile
        let start: usize = (decile + 1..=10).map(|d| self.sizes[d - 1]).sum();
        start..start + self.sizes[decile - 1]
    }
}

/// Per-decile means of one metric under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct DecileReport {
    pub strategy: Strategy,
    pub metric: Metric,
    /// means[d - 1] = mean of decile d; 0.0 for an empty decile.
    pub decile_means: [f64; 10],
    pub partition: DecilePartition,
}

impl DecileReport {
    pub fn mean(&self, decile: usize) -> f64 {
        self.decile_means[decile - 1]
    }
}

/// Averages `values` per decile of the ranking. Every ranked opinion needs a
/// value.
pub fn decile_report(
    ranking: &Ranking,
    values: &BTreeMap<String, f64>,
    metric: Metric,
) -> Result<DecileReport, EvalError> {
    let ranked_values = lookup_all(ranking, values)?;
    let partition = DecilePartition::new(ranking.len());
    let mut decile_means = [0.0f64; 10];
    for decile in 1..=10 {
        let block = partition.block(decile);
        if block.is_empty() {
            continue;
        }
        let sum: f64 = ranked_values[block.clone()].iter().sum();
        decile_means[decile - 1] = sum / block.len() as f64;
    }
    Ok(DecileReport {
        strategy: ranking.strategy,
        metric,
        decile_means,
        partition,
    })
}

fn lookup_all(ranking: &Ranking, values: &BTreeMap<String, f64>) -> Result<Vec<f64>, EvalError> {
    ranking
        .ordered
        .iter()
        .map(|id| {
            values
                .get(id)
                .copied()
                .ok_or_else(|| EvalError::MissingOutcome(id.clone()))
        })
        .collect()
}

/// Mean of `values` over the first k ranked opinions.
pub fn top_k_report(
    ranking: &Ranking,
    values: &BTreeMap<String, f64>,
    k: usize,
) -> Result<f64, EvalError> {
    if k == 0 || k > ranking.len() {
        return Err(EvalError::BadTopK {
            k,
            n: ranking.len(),
        });
    }
    let ranked_values = lookup_all(ranking, values)?;
    Ok(ranked_values[..k].iter().sum::<f64>() / k as f64)
}

/// Normalized discounted cumulative gain of the ranking against non-negative
/// relevances: gain is the relevance itself, the discount at 1-based
/// position p is 1/log2(p+1), and `cutoff` limits both the realized and the
/// ideal sum.
pub fn ndcg(
    ranking: &Ranking,
    relevance: &BTreeMap<String, f64>,
    cutoff: Option<usize>,
) -> Result<f64, EvalError> {
    if cutoff == Some(0) {
        return Err(EvalError::ZeroCutoff);
    }
    let mut gains = Vec::with_capacity(ranking.len());
    for id in &ranking.ordered {
        let rel = relevance
            .get(id)
            .copied()
            .ok_or_else(|| EvalError::MissingRelevance(id.clone()))?;
        if rel < 0.0 || rel.is_nan() {
            return Err(EvalError::NegativeRelevance {
                opinion_id: id.clone(),
                relevance: rel,
            });
        }
        gains.push(rel);
    }
    if gains.iter().all(|&g| g == 0.0) {
        return Err(EvalError::AllZeroRelevance);
    }
    let limit = cutoff.unwrap_or(gains.len()).min(gains.len());
    let dcg_of = |values: &[f64]| -> f64 {
        values
            .iter()
            .take(limit)
            .enumerate()
            .map(|(i, g)| g / ((i + 2) as f64).log2())
            .sum()
    };
    let dcg = dcg_of(&gains);
    let mut ideal = gains.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg_of(&ideal);
    Ok(dcg / idcg)
}

/// Friedman rank test over an n-blocks x k-treatments matrix of measurements.
///
/// Measurements are ranked within each block (average ranks on ties), the
/// uncorrected chi-square statistic with k-1 degrees of freedom is formed
/// from the treatment rank sums, and the p-value comes from the chi-square
/// survival function.
pub fn friedman_test(matrix: &[Vec<f64>]) -> Result<(f64, f64), EvalError> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(EvalError::DegenerateMatrix { n, k });
    }
    let mut rank_sums = vec![0.0f64; k];
    for (row_index, row) in matrix.iter().enumerate() {
        if row.len() != k {
            return Err(EvalError::RaggedMatrix { row: row_index });
        }
        for (j, rank) in within_block_ranks(row).into_iter().enumerate() {
            rank_sums[j] += rank;
        }
    }
    let n_f = n as f64;
    let k_f = k as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let statistic = (12.0 / (n_f * k_f * (k_f + 1.0)) * sum_sq - 3.0 * n_f * (k_f + 1.0)).max(0.0);
    let p_value = chi2::survival(statistic, k - 1);
    Ok((statistic, p_value))
}

/// 1-based ranks of a block, smallest first, with average ranks for ties.
fn within_block_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        // positions i..=j share the average of ranks i+1..=j+1
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &index in &order[i..=j] {
            ranks[index] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test where blocks are opinions, treatments are strategies, and
/// the measurement is the opinion's 1-based rank position under each
/// strategy. All rankings must cover the same opinion set.
pub fn friedman_from_rankings(rankings: &[Ranking]) -> Result<(f64, f64), EvalError> {
    let k = rankings.len();
    if k < 2 {
        return Err(EvalError::DegenerateMatrix {
            n: rankings.first().map_or(0, Ranking::len),
            k,
        });
    }
    let ids: BTreeSet<&str> = rankings[0].ordered.iter().map(String::as_str).collect();
    for r in rankings {
        let other: BTreeSet<&str> = r.ordered.iter().map(String::as_str).collect();
        if other != ids {
            return Err(EvalError::RankingMismatch);
        }
    }
    let positions: Vec<BTreeMap<&str, usize>> = rankings.iter().map(Ranking::positions).collect();
    let matrix: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| positions.iter().map(|p| p[id] as f64).collect())
        .collect();
    friedman_test(&matrix)
}

/// One row of `report.csv`; `kind` is one of decile, topk, ndcg,
/// friedman_statistic, friedman_p_value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub metric: String,
    pub kind: String,
    pub param: String,
    pub value: f64,
}

pub const REPORT_HEADER: &str = "strategy,metric,kind,param,value";

pub fn write_report(rows: &[ReportRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.strategy, r.metric, r.kind, r.param, r.value
        )?;
    }
    Ok(())
}

/// Expands a decile report into CSV rows, decile 1 through 10.
pub fn decile_rows(report: &DecileReport) -> Vec<ReportRow> {
    (1..=10)
        .map(|d| ReportRow {
            strategy: report.strategy.to_string(),
            metric: report.metric.as_str().to_string(),
            kind: "decile".into(),
            param: d.to_string(),
            value: report.mean(d),
        })
        .collect()
}

/// Chi-square survival function via the regularized incomplete gamma
/// function, accurate to relative 1e-10 over the tested range.
mod chi2 {
    /// Lanczos approximation (g = 7, 9 coefficients).
    fn ln_gamma(z: f64) -> f64 {
        // published coefficients, kept verbatim
        #[allow(clippy::excessive_precision)]
        const COEFFS: [f64; 9] = [
            0.999_999_999_999_809_93,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_13,
            -176.615_029_162_140_59,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_571_6e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if z < 0.5 {
            // reflection formula
            let pi = std::f64::consts::PI;
            return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
        }
        let z = z - 1.0;
        let mut x = COEFFS[0];
        for (i, c) in COEFFS.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
    }

    const EPS: f64 = 1e-14;
    const MAX_ITER: usize = 500;

    /// Regularized lower incomplete gamma P(a, x) by series, for x < a + 1.
    fn gamma_p_series(a: f64, x: f64) -> f64 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..MAX_ITER {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    }

    /// Regularized upper incomplete gamma Q(a, x) by continued fraction
    /// (modified Lentz), for x >= a + 1.
    fn gamma_q_cf(a: f64, x: f64) -> f64 {
        const FPMIN: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }

    /// P(X > x) for a chi-square variable with `df` degrees of freedom.
    pub fn survival(x: f64, df: usize) -> f64 {
        debug_assert!(df >= 1);
        if x <= 0.0 {
            return 1.0;
        }
        let a = df as f64 / 2.0;
        let half_x = x / 2.0;
        if half_x < a + 1.0 {
            1.0 - gamma_p_series(a, half_x)
        } else {
            gamma_q_cf(a, half_x)
        }
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn score(id: &str, value: f64) -> StrategyScore {
        StrategyScore::defined(id, Strategy::AllSent, value)
    }

    #[test]
    fn rank_sorts_by_score_then_id() {
        let ranking = rank(vec![score("A", 0.9), score("B", 0.5), score("C", 0.7)]).unwrap();
        assert_eq!(ranking.ordered, ["A", "C", "B"]);
    }

    #[test]
    fn ties_break_by_opinion_id() {
        let ranking = rank(vec![score("B", 0.5), score("A", 0.5)]).unwrap();
        assert_eq!(ranking.ordered, ["A", "B"]);
    }

    #[test]
    fn undefined_scores_trail_defined_ones() {
        let ranking = rank(vec![
            StrategyScore::undefined("B", Strategy::AllSent),
            score("A", 0.4),
        ])
        .unwrap();
        assert_eq!(ranking.ordered, ["A", "B"]);
    }

    #[test]
    fn duplicates_and_empty_input_are_errors() {
        assert!(matches!(
            rank(vec![score("A", 0.1), score("A", 0.2)]),
            Err(EvalError::DuplicateOpinion(id)) if id == "A"
        ));
        assert!(matches!(rank(vec![]), Err(EvalError::EmptyScores)));
    }

    #[test]
    fn partition_of_23_matches_remainder_rule() {
        let p = DecilePartition::new(23);
        let sizes: Vec<usize> = (1..=10).rev().map(|d| p.size(d)).collect();
        assert_eq!(sizes, [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        // blocks tile the ranking in rank order, 10th decile first
        assert_eq!(p.block(10), 0..3);
        assert_eq!(p.block(9), 3..6);
        assert_eq!(p.block(1), 21..23);
    }

    #[test]
    fn partition_is_a_partition_for_many_sizes() {
        for n in [0usize, 1, 5, 10, 23, 100, 999, 1000] {
            let p = DecilePartition::new(n);
            let total: usize = (1..=10).map(|d| p.size(d)).sum();
            assert_eq!(total, n);
            let mut covered = 0;
            for d in (1..=10).rev() {
                let block = p.block(d);
                assert_eq!(block.start, covered);
                covered = block.end;
            }
            assert_eq!(covered, n);
            let max = (1..=10).map(|d| p.size(d)).max().unwrap();
            let min = (1..=10).map(|d| p.size(d)).min().unwrap();
            assert!(max - min <= 1);
        }
    }

    fn ranked_values(n: usize) -> (Ranking, BTreeMap<String, f64>) {
        // opinion i has score and metric value (n - i) / n: rank order = value order
        let scores: Vec<StrategyScore> = (0..n)
            .map(|i| score(&format!("op-{i:04}"), (n - i) as f64 / n as f64))
            .collect();
        let values: BTreeMap<String, f64> = (0..n)
            .map(|i| (format!("op-{i:04}"), (n - i) as f64 / n as f64))
            .collect();
        (rank(scores).unwrap(), values)
    }

    #[test]
    fn decile_means_follow_rank_blocks() {
        let (ranking, values) = ranked_values(10);
        let report = decile_report(&ranking, &values, Metric::Mpp).unwrap();
        assert_relative_eq!(report.mean(10), 1.0);
        assert_relative_eq!(report.mean(1), 0.1);
    }

    #[test]
    fn constant_metric_gives_constant_deciles() {
        let scores: Vec<StrategyScore> =
            (0..20).map(|i| score(&format!("op-{i:02}"), i as f64)).collect();
        let values: BTreeMap<String, f64> =
            (0..20).map(|i| (format!("op-{i:02}"), 0.05)).collect();
        let ranking = rank(scores).unwrap();
        let report = decile_report(&ranking, &values, Metric::Ml).unwrap();
        for d in 1..=10 {
            assert_relative_eq!(report.mean(d), 0.05);
        }
    }

    #[test]
    fn missing_outcome_is_an_error_naming_the_opinion() {
        let (ranking, mut values) = ranked_values(10);
        values.remove("op-0003");
        let err = decile_report(&ranking, &values, Metric::Mpp).unwrap_err();
        assert_eq!(err, EvalError::MissingOutcome("op-0003".into()));
    }

    #[test]
    fn size_weighted_decile_means_recover_global_mean() {
        for n in [10usize, 23, 100, 1000] {
            let (ranking, values) = ranked_values(n);
            let report = decile_report(&ranking, &values, Metric::Mpp).unwrap();
            let weighted: f64 = (1..=10)
                .map(|d| report.mean(d) * report.partition.size(d) as f64)
                .sum();
            let global: f64 = values.values().sum::<f64>();
            assert_relative_eq!(weighted, global, max_relative = 1e-12);
        }
    }

    #[test]
    fn top_k_means_match_hand_results() {
        let scores = vec![score("A", 0.9), score("B", 0.8), score("C", 0.7)];
        let values: BTreeMap<String, f64> = [
            ("A".to_string(), 0.2),
            ("B".to_string(), 0.1),
            ("C".to_string(), 0.0),
        ]
        .into();
        let ranking = rank(scores).unwrap();
        assert_relative_eq!(top_k_report(&ranking, &values, 2).unwrap(), 0.15);
        assert_relative_eq!(top_k_report(&ranking, &values, 1).unwrap(), 0.2);
        // k = n equals the corpus-wide mean
        assert_relative_eq!(top_k_report(&ranking, &values, 3).unwrap(), 0.1);
        assert!(matches!(
            top_k_report(&ranking, &values, 0),
            Err(EvalError::BadTopK { .. })
        ));
        assert!(matches!(
            top_k_report(&ranking, &values, 4),
            Err(EvalError::BadTopK { .. })
        ));
    }

    #[test]
    fn ndcg_is_one_for_ideal_ranking_and_single_item() {
        let ranking = rank(vec![score("A", 0.9), score("B", 0.5)]).unwrap();
        let rel: BTreeMap<String, f64> =
            [("A".to_string(), 3.0), ("B".to_string(), 1.0)].into();
        assert_eq!(ndcg(&ranking, &rel, None).unwrap(), 1.0);

        let single = rank(vec![score("A", 0.9)]).unwrap();
        let rel: BTreeMap<String, f64> = [("A".to_string(), 2.0)].into();
        assert_eq!(ndcg(&single, &rel, None).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_two_item_inversion_matches_hand_value() {
        // ranking [B, A] with relevances A: 1, B: 0 -> (1/log2(3)) / 1
        let ranking = rank(vec![score("B", 0.9), score("A", 0.5)]).unwrap();
        let rel: BTreeMap<String, f64> =
            [("A".to_string(), 1.0), ("B".to_string(), 0.0)].into();
        let value = ndcg(&ranking, &rel, None).unwrap();
        assert_relative_eq!(value, 0.6309297535714574, epsilon = 1e-12);
    }

    #[test]
    fn ndcg_rejects_degenerate_relevance() {
        let ranking = rank(vec![score("A", 0.9), score("B", 0.5)]).unwrap();
        let zeros: BTreeMap<String, f64> =
            [("A".to_string(), 0.0), ("B".to_string(), 0.0)].into();
        assert_eq!(ndcg(&ranking, &zeros, None), Err(EvalError::AllZeroRelevance));

        let negative: BTreeMap<String, f64> =
            [("A".to_string(), -1.0), ("B".to_string(), 1.0)].into();
        assert!(matches!(
            ndcg(&ranking, &negative, None),
            Err(EvalError::NegativeRelevance { .. })
        ));
    }

    #[test]
    fn ndcg_scaling_invariance() {
        let ranking = rank(vec![score("A", 0.9), score("B", 0.5), score("C", 0.1)]).unwrap();
        let rel: BTreeMap<String, f64> = [
            ("A".to_string(), 0.3),
            ("B".to_string(), 0.9),
            ("C".to_string(), 0.2),
        ]
        .into();
        let scaled: BTreeMap<String, f64> =
            rel.iter().map(|(k, v)| (k.clone(), v * 7.25)).collect();
        let a = ndcg(&ranking, &rel, None).unwrap();
        let b = ndcg(&ranking, &scaled, None).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn ndcg_is_one_only_for_relevance_descending_orders() {
        // distinct relevances: any strict inversion must score below 1
        let rel: BTreeMap<String, f64> = [
            ("a".to_string(), 4.0),
            ("b".to_string(), 3.0),
            ("c".to_string(), 2.0),
            ("d".to_string(), 1.0),
        ]
        .into();
        let ids = ["a", "b", "c", "d"];
        let orders: [[usize; 4]; 5] = [
            [0, 1, 2, 3],
            [1, 0, 2, 3],
            [0, 1, 3, 2],
            [3, 2, 1, 0],
            [2, 0, 1, 3],
        ];
        for order in orders {
            let scores: Vec<StrategyScore> = order
                .iter()
                .enumerate()
                .map(|(pos, &i)| score(ids[i], 1.0 - pos as f64 * 0.1))
                .collect();
            let ranking = rank(scores).unwrap();
            let value = ndcg(&ranking, &rel, None).unwrap();
            if order == [0, 1, 2, 3] {
                assert_eq!(value, 1.0);
            } else {
                assert!(value < 1.0, "order {order:?} scored {value}");
            }
        }

        // with ties, any order of the tied block still scores 1
        let tied: BTreeMap<String, f64> = [
            ("a".to_string(), 2.0),
            ("b".to_string(), 1.0),
            ("c".to_string(), 1.0),
        ]
        .into();
        let ranking = rank(vec![score("a", 0.9), score("c", 0.5), score("b", 0.1)]).unwrap();
        assert_eq!(ndcg(&ranking, &tied, None).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_cutoff_limits_both_sums() {
        let ranking = rank(vec![score("A", 0.9), score("B", 0.5)]).unwrap();
        let rel: BTreeMap<String, f64> =
            [("A".to_string(), 0.0), ("B".to_string(), 1.0)].into();
        // at cutoff 1 the realized gain is 0 while the ideal is positive
        assert_eq!(ndcg(&ranking, &rel, Some(1)).unwrap(), 0.0);
        assert_eq!(ndcg(&ranking, &rel, Some(0)), Err(EvalError::ZeroCutoff));
    }

    #[test]
    fn friedman_identical_rankings_give_statistic_twenty() {
        // 10 blocks all ranking three treatments identically
        let matrix: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0, 2.0, 3.0]).collect();
        let (statistic, p) = friedman_test(&matrix).unwrap();
        assert_relative_eq!(statistic, 20.0, epsilon = 1e-9);
        assert!(p < 0.001);
        assert_relative_eq!(p, (-10.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn friedman_all_ties_give_zero_statistic() {
        let matrix: Vec<Vec<f64>> = (0..6).map(|_| vec![4.2, 4.2, 4.2]).collect();
        let (statistic, p) = friedman_test(&matrix).unwrap();
        assert_eq!(statistic, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn friedman_opposite_orders_cancel() {
        let matrix = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let (statistic, p) = friedman_test(&matrix).unwrap();
        assert_eq!(statistic, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn friedman_rejects_degenerate_dimensions() {
        assert!(matches!(
            friedman_test(&[vec![1.0, 2.0]]),
            Err(EvalError::DegenerateMatrix { n: 1, k: 2 })
        ));
        assert!(matches!(
            friedman_test(&[vec![1.0], vec![2.0]]),
            Err(EvalError::DegenerateMatrix { n: 2, k: 1 })
        ));
        assert!(matches!(
            friedman_test(&[vec![1.0, 2.0], vec![1.0]]),
            Err(EvalError::RaggedMatrix { row: 1 })
        ));
    }

    #[test]
    fn friedman_is_invariant_under_monotone_transforms() {
        let matrix = vec![
            vec![0.1, 0.7, 0.3],
            vec![0.9, 0.2, 0.4],
            vec![0.5, 0.6, 0.8],
            vec![0.3, 0.1, 0.2],
        ];
        let transformed: Vec<Vec<f64>> = matrix
            .iter()
            .map(|row| row.iter().map(|v| f64::exp(v * 3.0) + 10.0).collect())
            .collect();
        assert_eq!(
            friedman_test(&matrix).unwrap(),
            friedman_test(&transformed).unwrap()
        );
    }

    #[test]
    fn average_ranks_are_used_for_ties() {
        assert_eq!(within_block_ranks(&[5.0, 5.0, 8.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(within_block_ranks(&[2.0, 1.0, 2.0, 2.0]), vec![3.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn friedman_from_rankings_uses_rank_positions() {
        let a = rank(vec![score("x", 0.9), score("y", 0.5), score("z", 0.1)]).unwrap();
        let mut b_scores = vec![
            StrategyScore::defined("x", Strategy::KeyPremise, 0.2),
            StrategyScore::defined("y", Strategy::KeyPremise, 0.8),
            StrategyScore::defined("z", Strategy::KeyPremise, 0.5),
        ];
        let b = rank(std::mem::take(&mut b_scores)).unwrap();
        let (statistic, p) = friedman_from_rankings(&[a.clone(), b]).unwrap();
        assert!(statistic >= 0.0);
        assert!((0.0..=1.0).contains(&p));

        assert!(matches!(
            friedman_from_rankings(&[a]),
            Err(EvalError::DegenerateMatrix { .. })
        ));
    }

    #[test]
    fn mismatched_ranking_sets_are_rejected() {
        let a = rank(vec![score("x", 0.9), score("y", 0.5)]).unwrap();
        let b = rank(vec![
            StrategyScore::defined("x", Strategy::AllArg, 0.9),
            StrategyScore::defined("w", Strategy::AllArg, 0.5),
        ])
        .unwrap();
        assert_eq!(friedman_from_rankings(&[a, b]), Err(EvalError::RankingMismatch));
    }
}
