//! Replicated contests and reward-spread sweeps.
//!
//! Replication `r` of every spread shares one seed, derived from the master
//! seed and `r` alone, so the conditions of a replication see the same
//! corpus, the same workers and the same random streams. Differences
//! between spreads within a replication come from the incentive mechanism,
//! and the sign test pairs replications across spreads.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contest::{Post, WorkerId, WorkerProfile};
use crate::error::{Error, Result};
use crate::experiment::config::{CorpusSource, ExperimentConfig};
use crate::experiment::corpus::{generate_corpus, read_corpus_jsonl};
use crate::experiment::stats::{anova_f, mean, sample_sd, sign_test, Anova, SignTest};
use crate::inference::recovery::draw_profiles;
use crate::sim::sampling::{mix_seed, substream};
use crate::sim::{run_contest_with, EventLog, ExitModel, RateModel, SimOptions};

/// Checkpoints of the active-worker curve: 0%, 5%, ..., 100%.
pub const CURVE_POINTS: usize = 21;

/// Index of the 90% checkpoint in the active-worker curve.
pub const NINETY_PERCENT: usize = 18;

pub const TREND_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestSummary {
    pub spread: u32,
    pub replication: u32,
    pub seed: u64,
    pub total_annotations: u64,
    /// Unique (post, entity count) labels.
    pub distinct_annotations: u64,
    /// Over workers with at least one annotation.
    pub mean_annotations_per_active_worker: f64,
    pub active_worker_counts: Vec<u32>,
    /// Seconds of annotation time per labelled entity; `None` when no
    /// entity was labelled.
    pub mean_annotation_time_s_per_entity: Option<f64>,
    pub top1_annotations: u64,
    pub top10_annotations: u64,
    pub winners: Vec<WorkerId>,
    pub total_payout: f64,
    pub posts_solved: u64,
    pub posts_dropped: u64,
    pub exits: u64,
}

impl ContestSummary {
    pub fn from_log(log: &EventLog, replication: u32) -> Self {
        let config = &log.config;
        let n = log.profiles.len() as u32;
        let per_worker = log.annotations_by_worker();
        let active = per_worker.values().filter(|&&c| c > 0).count();
        let total = log.events.len() as u64;
        let distinct: BTreeSet<_> = log
            .events
            .iter()
            .map(|e| (e.post_id, e.annotated_count))
            .collect();
        let entities: u64 = log
            .events
            .iter()
            .map(|e| u64::from(e.annotated_count))
            .sum();
        let busy_ms: u64 = log.events.iter().map(|e| e.holding_time_ms).sum();

        let curve = (0..CURVE_POINTS as u64)
            .map(|c| {
                let at = c * log.contest_ms / (CURVE_POINTS as u64 - 1);
                n - log
                    .exits
                    .iter()
                    .filter(|x| x.exit_time_ms <= at && c > 0)
                    .count() as u32
            })
            .collect();

        let ranked = &log.final_ranking.entries;
        let top = |k: usize| ranked.iter().take(k).map(|e| e.annotations).sum::<u64>();
        let winners: Vec<WorkerId> = ranked
            .iter()
            .filter(|e| e.annotations >= config.quality_constraint)
            .take(config.reward_spread as usize)
            .map(|e| e.worker_id)
            .collect();

        ContestSummary {
            spread: config.reward_spread,
            replication,
            seed: log.seed,
            total_annotations: total,
            distinct_annotations: distinct.len() as u64,
            mean_annotations_per_active_worker: if active > 0 {
                total as f64 / active as f64
            } else {
                0.0
            },
            active_worker_counts: curve,
            mean_annotation_time_s_per_entity: (entities > 0)
                .then(|| busy_ms as f64 / 1000.0 / entities as f64),
            top1_annotations: top(1),
            top10_annotations: top(10),
            total_payout: config.prize_value * winners.len() as f64,
            winners,
            posts_solved: log.stream.solved,
            posts_dropped: log.stream.dropped,
            exits: log.exits.len() as u64,
        }
    }

    pub fn active_fraction_at(&self, checkpoint: usize) -> f64 {
        let n = self.active_worker_counts[0];
        if n == 0 {
            return 0.0;
        }
        f64::from(self.active_worker_counts[checkpoint]) / f64::from(n)
    }
}

/// Seed shared by every condition of replication `replication`.
pub fn replication_seed(master_seed: u64, replication: u32) -> u64 {
    mix_seed(master_seed, u64::from(replication))
}

/// Posts for one replication: a fresh synthetic corpus, or the first
/// `n_posts` of the configured file.
pub fn replication_posts(
    config: &ExperimentConfig,
    seed: u64,
    file_posts: Option<&[Post]>,
) -> Result<Vec<Post>> {
    match (&config.corpus, file_posts) {
        (CorpusSource::Generate { mean_entities }, _) => generate_corpus(
            config.contest.n_posts,
            &mut substream(seed, 1),
            *mean_entities,
        ),
        (CorpusSource::File(_), Some(posts)) => take_posts(posts, config.contest.n_posts),
        (CorpusSource::File(path), None) => take_posts(&load_corpus(path)?, config.contest.n_posts),
    }
}

fn take_posts(posts: &[Post], n: u64) -> Result<Vec<Post>> {
    if (posts.len() as u64) < n {
        return Err(Error::Config(format!(
            "corpus holds {} posts, contest needs {n}",
            posts.len()
        )));
    }
    Ok(posts[..n as usize].to_vec())
}

pub fn load_corpus(path: &Path) -> Result<Vec<Post>> {
    let file = std::fs::File::open(path)?;
    read_corpus_jsonl(std::io::BufReader::new(file))
}

pub fn replication_profiles(config: &ExperimentConfig, seed: u64) -> Result<Vec<WorkerProfile>> {
    let mut profiles = draw_profiles(&config.behavior_prior, config.contest.n_workers, seed)?;
    if config.equal_rates {
        for p in &mut profiles {
            p.lambda_out = p.lambda_in;
        }
    }
    Ok(profiles)
}

pub fn sim_options(config: &ExperimentConfig) -> SimOptions {
    SimOptions {
        rate_model: RateModel::TwoState,
        exit: config.exit,
        accuracy_floor: config.accuracy_floor,
        annotation_cap: None,
    }
}

/// Simulate one (spread, replication) cell and keep its log.
pub fn simulate_condition(
    config: &ExperimentConfig,
    spread: u32,
    replication: u32,
    file_posts: Option<&[Post]>,
) -> Result<(EventLog, ContestSummary)> {
    config.validate()?;
    let contest = config.contest_for(spread);
    let seed = replication_seed(config.master_seed, replication);
    let posts = replication_posts(config, seed, file_posts)?;
    let profiles = replication_profiles(config, seed)?;
    let log = run_contest_with(&contest, &profiles, &posts, seed, &sim_options(config))?;
    log.verify()?;
    let summary = ContestSummary::from_log(&log, replication);
    Ok((log, summary))
}

pub fn run_condition(
    config: &ExperimentConfig,
    spread: u32,
    replication: u32,
) -> Result<ContestSummary> {
    Ok(simulate_condition(config, spread, replication, None)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplication {
    pub spread: u32,
    pub replication: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub spread: u32,
    pub replications: u32,
    pub mean_total: f64,
    pub sd_total: f64,
    pub mean_distinct: f64,
    pub sd_distinct: f64,
    pub mean_per_active_worker: f64,
    pub mean_active_fraction_at_90: f64,
    pub mean_exits: f64,
    pub mean_payout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendVerdict {
    Increasing,
    NoTrend,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub lower_spread: u32,
    pub higher_spread: u32,
    pub sign: SignTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub verdict: TrendVerdict,
    /// Adjacent spreads, paired by replication.
    pub comparisons: Vec<PairedComparison>,
    pub anova: Option<Anova>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SpreadRow>,
    pub summaries: Vec<ContestSummary>,
    pub failures: Vec<FailedReplication>,
    pub trend: TrendReport,
    /// Mean active workers per spread at each curve checkpoint.
    pub exit_curves: Vec<(u32, Vec<f64>)>,
    /// Replication 0 of each spread, for race plots.
    #[serde(skip)]
    pub sample_logs: Vec<EventLog>,
}

impl SweepResult {
    /// True when some replication failed and the table covers less data.
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Run every spread for every replication, in parallel, and summarise.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let file_posts = match &config.corpus {
        CorpusSource::File(path) => Some(load_corpus(path)?),
        CorpusSource::Generate { .. } => None,
    };
    let mut spreads = config.spreads.clone();
    spreads.sort_unstable();
    spreads.dedup();
    let cells: Vec<(u32, u32)> = spreads
        .iter()
        .flat_map(|&s| (0..config.replications).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(s, r)| {
            let outcome = simulate_condition(config, s, r, file_posts.as_deref());
            (
                s,
                r,
                outcome.map(|(log, summary)| (if r == 0 { Some(log) } else { None }, summary)),
            )
        })
        .collect();

    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    let mut sample_logs = Vec::new();
    for (spread, replication, outcome) in outcomes {
        match outcome {
            Ok((log, summary)) => {
                sample_logs.extend(log);
                summaries.push(summary);
            }
            Err(e) => failures.push(FailedReplication {
                spread,
                replication,
                error: e.to_string(),
            }),
        }
    }

    let by_spread: BTreeMap<u32, Vec<&ContestSummary>> = spreads
        .iter()
        .map(|&s| (s, summaries.iter().filter(|x| x.spread == s).collect()))
        .collect();
    let rows = by_spread.iter().map(|(&s, xs)| spread_row(s, xs)).collect();
    let exit_curves = by_spread
        .iter()
        .map(|(&s, xs)| {
            let curve = (0..CURVE_POINTS)
                .map(|c| {
                    mean(
                        &xs.iter()
                            .map(|x| f64::from(x.active_worker_counts[c]))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            (s, curve)
        })
        .collect();
    let trend = trend_report(&spreads, &by_spread, config.replications);

    Ok(SweepResult {
        rows,
        summaries,
        failures,
        trend,
        exit_curves,
        sample_logs,
    })
}

fn spread_row(spread: u32, xs: &[&ContestSummary]) -> SpreadRow {
    let col = |f: fn(&ContestSummary) -> f64| xs.iter().map(|x| f(x)).collect::<Vec<f64>>();
    let totals = col(|x| x.total_annotations as f64);
    let distinct = col(|x| x.distinct_annotations as f64);
    SpreadRow {
        spread,
        replications: xs.len() as u32,
        mean_total: mean(&totals),
        sd_total: sample_sd(&totals),
        mean_distinct: mean(&distinct),
        sd_distinct: sample_sd(&distinct),
        mean_per_active_worker: mean(&col(|x| x.mean_annotations_per_active_worker)),
        mean_active_fraction_at_90: mean(&col(|x| x.active_fraction_at(NINETY_PERCENT))),
        mean_exits: mean(&col(|x| x.exits as f64)),
        mean_payout: mean(&col(|x| x.total_payout)),
    }
}

fn trend_report(
    spreads: &[u32],
    by_spread: &BTreeMap<u32, Vec<&ContestSummary>>,
    replications: u32,
) -> TrendReport {
    if spreads.len() < 2 || replications < 2 {
        return TrendReport {
            verdict: TrendVerdict::NotApplicable,
            comparisons: Vec::new(),
            anova: None,
        };
    }
    let totals = |s: u32| -> BTreeMap<u32, f64> {
        by_spread[&s]
            .iter()
            .map(|x| (x.replication, x.total_annotations as f64))
            .collect()
    };
    let mut comparisons = Vec::new();
    let mut increasing = true;
    for w in spreads.windows(2) {
        let (lo, hi) = (totals(w[0]), totals(w[1]));
        let pairs: Vec<(f64, f64)> = lo
            .iter()
            .filter_map(|(r, &a)| hi.get(r).map(|&b| (a, b)))
            .collect();
        let sign = sign_test(&pairs);
        let lo_mean = mean(&lo.values().copied().collect::<Vec<_>>());
        let hi_mean = mean(&hi.values().copied().collect::<Vec<_>>());
        increasing &= hi_mean > lo_mean && sign.p_value < TREND_ALPHA;
        comparisons.push(PairedComparison {
            lower_spread: w[0],
            higher_spread: w[1],
            sign,
        });
    }
    let groups: Vec<Vec<f64>> = spreads
        .iter()
        .map(|&s| totals(s).into_values().collect())
        .collect();
    TrendReport {
        verdict: if increasing {
            TrendVerdict::Increasing
        } else {
            TrendVerdict::NoTrend
        },
        comparisons,
        anova: anova_f(&groups).ok(),
    }
}

/// Survival at the 90% checkpoint for one exit model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub base_hazard: f64,
    /// Mean fraction of workers active at 90% of the contest, per spread.
    pub survival: Vec<(u32, f64)>,
}

impl CalibrationPoint {
    pub fn worst(&self) -> f64 {
        self.survival
            .iter()
            .map(|&(_, s)| s)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Mean active fraction at the 90% mark for each base hazard and spread.
pub fn exit_calibration(
    config: &ExperimentConfig,
    base_hazards: &[f64],
    replications: u32,
) -> Result<Vec<CalibrationPoint>> {
    base_hazards
        .iter()
        .map(|&h| {
            let mut c = config.clone();
            c.exit = ExitModel {
                base_hazard: h,
                ..config.exit
            };
            c.replications = replications;
            c.validate()?;
            let survival = c
                .spreads
                .iter()
                .map(|&s| {
                    let fractions = (0..replications)
                        .into_par_iter()
                        .map(|r| Ok(run_condition(&c, s, r)?.active_fraction_at(NINETY_PERCENT)))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((s, mean(&fractions)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CalibrationPoint {
                base_hazard: h,
                survival,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contest::ContestConfig;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            contest: ContestConfig {
                n_workers: 8,
                n_posts: 160,
                window_size: 40,
                arrival_rate: 4.0,
                reward_spread: 1,
                ..ContestConfig::scaled_defaults()
            },
            spreads: vec![1, 4],
            replications: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn field_duration_is_380_seconds() {
        let c = ExperimentConfig {
            contest: ContestConfig::field_defaults(),
            ..ExperimentConfig::default()
        };
        assert_eq!(c.contest_for(10).duration_ms(), 380_000);
        assert_eq!(ExperimentConfig::default().contest.duration_ms(), 380_000);
    }

    #[test]
    fn condition_is_deterministic() {
        let c = small();
        let a = run_condition(&c, 1, 2).unwrap();
        let b = run_condition(&c, 1, 2).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
        assert_eq!(a.active_worker_counts.len(), CURVE_POINTS);
        assert!(a.distinct_annotations <= a.total_annotations);
        assert!(a.active_worker_counts.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn full_spread_never_exits() {
        let mut c = small();
        c.exit = ExitModel::with_base_hazard(1.0);
        let s = run_condition(&c, 8, 0).unwrap();
        assert_eq!(s.exits, 0);
        assert!(s.active_worker_counts.iter().all(|&n| n == 8));
    }

    #[test]
    fn payout_accounting() {
        let mut c = small();
        c.contest.quality_constraint = 0;
        let s = run_condition(&c, 4, 0).unwrap();
        assert_eq!(s.winners.len(), 4);
        assert!((s.total_payout - 0.4).abs() < 1e-12);

        c.contest.quality_constraint = u64::MAX;
        let s = run_condition(&c, 4, 0).unwrap();
        assert!(s.winners.is_empty());
        assert_eq!(s.total_payout, 0.0);
    }

    #[test]
    fn sweep_keeps_order_and_single_spread_is_not_applicable() {
        let c = small();
        let r = sweep(&c).unwrap();
        assert_eq!(r.summaries.len(), 6);
        assert_eq!(
            r.rows.iter().map(|x| x.spread).collect::<Vec<_>>(),
            vec![1, 4]
        );
        assert_eq!(r.sample_logs.len(), 2);
        assert!(!r.is_partial());

        let single = ExperimentConfig {
            spreads: vec![4],
            ..c
        };
        assert_eq!(
            sweep(&single).unwrap().trend.verdict,
            TrendVerdict::NotApplicable
        );
    }
}
