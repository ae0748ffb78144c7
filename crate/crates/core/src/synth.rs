//! Deterministic synthetic corpora: calendars, price series, opinions,
//! analyst events, and institutional flows, with a controllable coupling
//! between latent opinion strength and post-release returns.
//!
//! Every opinion gets a latent true strength u in [0,1]. Over the opinion's
//! horizon window the stock's per-day log drift is `coupling * g(u)` where
//! `g` is calibrated so the full-window favorable move equals `MAX_MOVE * u`
//! for either stance, and the random volatility inside the window scales by
//! `1 - coupling`. At coupling 1 the favorable extreme is therefore an exact
//! strictly monotone function of u; at coupling 0 prices ignore opinions
//! entirely. Sentence fsd is `clamp(u + noise, 0, 1)`.
//!
//! Opinion windows never overlap on a stock and always fit inside the
//! calendar, so realized windows are never truncated.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CorpusBundle;
use crate::model::{
    AnalystEvent, ArgLabel, Calendar, DailyBar, EventKind, FlowCategory, FlowRecord, Opinion,
    PriceSeries, Sentence, Source, Stance,
};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("infeasible config: {0}")]
    Infeasible(String),
}

/// Knobs of the generator. Missing fields in a config file take these
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    pub n_opinions: usize,
    /// Inclusive (min, max) sentences per opinion.
    pub sentences_per_opinion: (usize, usize),
    /// 0 = returns ignore opinion strength, 1 = deterministic relation.
    pub strength_return_coupling: f64,
    /// Standard deviation of the per-sentence fsd perturbation around u.
    pub fsd_noise: f64,
    pub claim_ratio: f64,
    pub premise_ratio: f64,
    /// Probability an opinion triggers an in-window analyst view change.
    pub event_rate: f64,
    /// Probability an institutional category trades with the stance at t+1.
    pub flow_agreement_rate: f64,
    /// Horizon the drift windows are sized for.
    pub horizon_days: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_stocks: 50,
            n_days: 250,
            n_opinions: 200,
            sentences_per_opinion: (3, 8),
            strength_return_coupling: 0.6,
            fsd_noise: 0.15,
            claim_ratio: 0.3,
            premise_ratio: 0.3,
            event_rate: 0.3,
            flow_agreement_rate: 0.5,
            horizon_days: 60,
        }
    }
}

/// Total favorable move over a full window at u = 1, as a fraction.
const MAX_MOVE: f64 = 0.5;
/// Baseline daily log-return volatility outside opinion windows.
const DAILY_VOL: f64 = 0.015;
/// Volatility of the overnight open gap.
const GAP_VOL: f64 = 0.004;
/// Scale of the non-negative intraday high/low spreads.
const SPREAD_VOL: f64 = 0.006;
/// Rate of background analyst events that are not view changes.
const OTHER_EVENT_RATE: f64 = 0.1;

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::BadConfig(m.to_string()));
        if self.n_stocks == 0 || self.n_days == 0 || self.n_opinions == 0 {
            return bad("n_stocks, n_days, and n_opinions must be positive");
        }
        let (lo, hi) = self.sentences_per_opinion;
        if lo == 0 || lo > hi {
            return bad("sentences_per_opinion must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.strength_return_coupling) {
            return bad("strength_return_coupling must be in [0,1]");
        }
        if !self.fsd_noise.is_finite() || self.fsd_noise < 0.0 {
            return bad("fsd_noise must be a non-negative number");
        }
        if self.claim_ratio < 0.0 || self.premise_ratio < 0.0 {
            return bad("label ratios must be non-negative");
        }
        if self.claim_ratio + self.premise_ratio > 1.0 {
            return bad("claim_ratio + premise_ratio must not exceed 1");
        }
        if !(0.0..=1.0).contains(&self.event_rate) {
            return bad("event_rate must be in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.flow_agreement_rate) {
            return bad("flow_agreement_rate must be in [0,1]");
        }
        if self.horizon_days == 0 {
            return bad("horizon_days must be positive");
        }
        Ok(())
    }

    /// Non-overlapping release slots per stock; each slot owns the window
    /// [t+1, t+horizon] with t at the slot start.
    fn slots_per_stock(&self) -> usize {
        if self.n_days < self.horizon_days + 1 {
            return 0;
        }
        (self.n_days - 1 - self.horizon_days) / (self.horizon_days + 1) + 1
    }
}

/// Weekday calendar of `n_days` trading days starting 2020-01-06.
fn make_calendar(n_days: usize) -> Calendar {
    let mut dates = Vec::with_capacity(n_days);
    let mut date: NaiveDate = "2020-01-06".parse().unwrap();
    while dates.len() < n_days {
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(date);
        }
        date = date.succ_opt().unwrap();
    }
    Calendar::from_dates(dates).expect("weekday sequence is strictly increasing")
}

struct OpinionPlan {
    stock: usize,
    release_index: usize,
    u: f64,
    stance: Stance,
    source: Source,
    sd_draw: f64,
    sentences: Vec<Sentence>,
}

const POSITIVE_WORDS: [&str; 5] = ["growth", "strong", "beat", "upgrade", "record"];
const NEGATIVE_WORDS: [&str; 5] = ["decline", "weak", "miss", "downgrade", "risk"];
const NEUTRAL_WORDS: [&str; 5] = ["company", "market", "quarter", "guidance", "volume"];

fn sentence_text(rng: &mut ChaCha8Rng, u: f64) -> String {
    let len = rng.gen_range(4..=8);
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let roll: f64 = rng.gen();
        let word = if roll < 0.4 * u {
            POSITIVE_WORDS[rng.gen_range(0..POSITIVE_WORDS.len())]
        } else if roll < 0.4 {
            NEGATIVE_WORDS[rng.gen_range(0..NEGATIVE_WORDS.len())]
        } else {
            NEUTRAL_WORDS[rng.gen_range(0..NEUTRAL_WORDS.len())]
        };
        words.push(word);
    }
    words.join(" ")
}

fn plan_sentences(rng: &mut ChaCha8Rng, cfg: &SynthConfig, u: f64) -> Vec<Sentence> {
    let (lo, hi) = cfg.sentences_per_opinion;
    let count = rng.gen_range(lo..=hi);
    let mut sentences = Vec::with_capacity(count);
    for sent_id in 0..count {
        let roll: f64 = rng.gen();
        let label = if roll < cfg.claim_ratio {
            ArgLabel::Claim
        } else if roll < cfg.claim_ratio + cfg.premise_ratio {
            ArgLabel::Premise
        } else {
            ArgLabel::Other
        };
        let noise: f64 = {
            let z: f64 = StandardNormal.sample(rng);
            z * cfg.fsd_noise
        };
        let fsd = (u + noise).clamp(0.0, 1.0);
        let text = sentence_text(rng, u);
        sentences.push(
            Sentence::new(sent_id, text)
                .with_fsd(fsd)
                .with_label(label)
                .with_expert_like(label != ArgLabel::Other),
        );
    }
    // link every premise to one claim, when the opinion has claims
    let claims: Vec<usize> = sentences
        .iter()
        .filter(|s| s.label == ArgLabel::Claim)
        .map(|s| s.sent_id)
        .collect();
    for sentence in &mut sentences {
        if sentence.label == ArgLabel::Premise && !claims.is_empty() {
            let target = claims[rng.gen_range(0..claims.len())];
            sentence.supports = [target].into();
        }
    }
    sentences
}

/// Per-day log drift such that the compounded full-window favorable move is
/// exactly `MAX_MOVE * u`, directed by stance.
fn window_drift(u: f64, stance: Stance, coupling: f64, horizon: usize) -> f64 {
    let total = MAX_MOVE * u;
    let per_day = match stance {
        Stance::Bullish => (1.0 + total).ln() / horizon as f64,
        Stance::Bearish => (1.0 - total).ln() / horizon as f64,
    };
    coupling * per_day
}

/// Generates a full corpus bundle; identical seeds give identical bundles.
pub fn generate(cfg: &SynthConfig) -> Result<CorpusBundle, SynthError> {
    cfg.validate()?;
    let slots = cfg.slots_per_stock();
    let capacity = slots * cfg.n_stocks;
    if capacity < cfg.n_opinions {
        return Err(SynthError::Infeasible(format!(
            "{} opinions need more room: {} stocks x {} windows of horizon {} in {} days hold only {}",
            cfg.n_opinions, cfg.n_stocks, slots, cfg.horizon_days, cfg.n_days, capacity
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let calendar = make_calendar(cfg.n_days);
    let coupling = cfg.strength_return_coupling;

    // 1. plan opinions: latent strength, stance, sentences
    let mut plans = Vec::with_capacity(cfg.n_opinions);
    for j in 0..cfg.n_opinions {
        let u: f64 = rng.gen();
        let stance = if rng.gen::<f64>() < 0.5 {
            Stance::Bullish
        } else {
            Stance::Bearish
        };
        let source = if rng.gen::<f64>() < 0.5 {
            Source::Professional
        } else {
            Source::Amateur
        };
        let sd_draw: f64 = {
            let z: f64 = StandardNormal.sample(&mut rng);
            (0.15 + 0.25 * z).max(-0.95)
        };
        let sentences = plan_sentences(&mut rng, cfg, u);
        plans.push(OpinionPlan {
            stock: j % cfg.n_stocks,
            release_index: (j / cfg.n_stocks) * (cfg.horizon_days + 1),
            u,
            stance,
            source,
            sd_draw,
            sentences,
        });
    }

    // 2. drift and volatility-damping schedules per stock
    let mut drift = vec![vec![0.0f64; cfg.n_days]; cfg.n_stocks];
    let mut vol_scale = vec![vec![1.0f64; cfg.n_days]; cfg.n_stocks];
    for plan in &plans {
        let g = window_drift(plan.u, plan.stance, coupling, cfg.horizon_days);
        for day in plan.release_index + 1..=plan.release_index + cfg.horizon_days {
            drift[plan.stock][day] = g;
            vol_scale[plan.stock][day] = 1.0 - coupling;
        }
    }

    // 3. price paths
    let mut prices = std::collections::BTreeMap::new();
    for stock in 0..cfg.n_stocks {
        let stock_id = format!("S{stock:04}");
        let mut bars = Vec::with_capacity(cfg.n_days);
        let mut prev_close = 20.0 + 180.0 * rng.gen::<f64>();
        for day in 0..cfg.n_days {
            let damp = vol_scale[stock][day];
            let gap: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                GAP_VOL * damp * z
            };
            let ret: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                drift[stock][day] + DAILY_VOL * damp * z
            };
            let spread_up: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                (SPREAD_VOL * damp * z).abs()
            };
            let spread_down: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                (SPREAD_VOL * damp * z).abs().min(0.5)
            };
            let open = if day == 0 {
                prev_close
            } else {
                prev_close * gap.exp()
            };
            let close = open * ret.exp();
            let high = open.max(close) * (1.0 + spread_up);
            let low = open.min(close) * (1.0 - spread_down);
            let trading_day = calendar.at(day).expect("day within calendar");
            bars.push(
                DailyBar::new(trading_day, open, high, low, close)
                    .expect("constructed bars satisfy ordering"),
            );
            prev_close = close;
        }
        prices.insert(
            stock_id.clone(),
            PriceSeries::new(stock_id, bars).expect("days strictly increasing"),
        );
    }

    // 4. materialize opinions (price targets need realized closes)
    let mut opinions = Vec::with_capacity(cfg.n_opinions);
    for (j, plan) in plans.iter().enumerate() {
        let stock_id = format!("S{:04}", plan.stock);
        let release_day = calendar.at(plan.release_index).expect("slot inside calendar");
        let price_target = match plan.source {
            Source::Professional => {
                let close = prices[&stock_id].bar_at_index(plan.release_index).unwrap().close;
                Some(close * (1.0 + plan.sd_draw))
            }
            Source::Amateur => None,
        };
        opinions.push(Opinion {
            opinion_id: format!("op-{j:06}"),
            stock_id,
            release_day,
            stance: plan.stance,
            source: plan.source,
            price_target,
            sentences: plan.sentences.clone(),
        });
    }

    // 5. analyst events
    let mut analyst_events = Vec::new();
    for (j, plan) in plans.iter().enumerate() {
        let stock_id = format!("S{:04}", plan.stock);
        if rng.gen::<f64>() < cfg.event_rate {
            let offset = rng.gen_range(1..=6usize);
            if let Some(day) = calendar.at(plan.release_index + offset) {
                analyst_events.push(AnalystEvent {
                    stock_id: stock_id.clone(),
                    day,
                    analyst_id: format!("ana-{:02}", j % 17),
                    kind: EventKind::ViewChange,
                });
            }
        }
        if rng.gen::<f64>() < OTHER_EVENT_RATE {
            let offset = rng.gen_range(1..=6usize);
            if let Some(day) = calendar.at(plan.release_index + offset) {
                analyst_events.push(AnalystEvent {
                    stock_id,
                    day,
                    analyst_id: format!("ana-{:02}", j % 17),
                    kind: EventKind::Other,
                });
            }
        }
    }
    analyst_events.sort_by(|a, b| {
        (&a.stock_id, a.day.index, &a.analyst_id, a.kind.as_str()).cmp(&(
            &b.stock_id,
            b.day.index,
            &b.analyst_id,
            b.kind.as_str(),
        ))
    });

    // 6. institutional flows at t+1
    let mut flows = Vec::new();
    for plan in &plans {
        let stock_id = format!("S{:04}", plan.stock);
        let Some(day) = calendar.at(plan.release_index + 1) else {
            continue;
        };
        for category in FlowCategory::ALL {
            let magnitude = rng.gen_range(1..=10_000i64);
            let agree = rng.gen::<f64>() < cfg.flow_agreement_rate;
            let flip: f64 = rng.gen();
            let stance_sign = match plan.stance {
                Stance::Bullish => 1,
                Stance::Bearish => -1,
            };
            let net_units = if agree {
                stance_sign * magnitude
            } else if flip < 0.5 {
                -stance_sign * magnitude
            } else {
                0
            };
            flows.push(FlowRecord {
                stock_id: stock_id.clone(),
                day,
                category,
                net_units,
            });
        }
    }
    flows.sort_by(|a, b| {
        (&a.stock_id, a.day.index, a.category, a.net_units).cmp(&(
            &b.stock_id,
            b.day.index,
            b.category,
            b.net_units,
        ))
    });

    Ok(CorpusBundle {
        calendar,
        opinions,
        prices,
        analyst_events,
        flows,
    })
}
