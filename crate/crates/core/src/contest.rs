//! Contest economics: submission quality, worker utility, scoring, ranking
//! and reward-spread eligibility.
//!
//! Everything here is a pure function over immutable inputs. The simulator
//! and the experiment runner share these definitions so that a contest
//! replayed from its event log ranks and pays workers exactly as it did live.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::task_intensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub u32);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PostId(pub u64);

impl fmt::Display for PostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// One streamed annotation task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub token_count: u32,
    /// Pre-computed entity count; the requester's quality anchor.
    pub expected_entities: u32,
    pub arrival_index: u64,
}

impl Post {
    pub fn new(
        id: u64,
        token_count: u32,
        expected_entities: u32,
        arrival_index: u64,
    ) -> Result<Self> {
        let post = Post {
            id: PostId(id),
            token_count,
            expected_entities,
            arrival_index,
        };
        post.validate()?;
        Ok(post)
    }

    pub fn validate(&self) -> Result<()> {
        if self.token_count == 0 {
            return Err(Error::Config(format!(
                "{}: token_count must be >= 1",
                self.id
            )));
        }
        if self.expected_entities > self.token_count {
            return Err(Error::Config(format!(
                "{}: expected_entities {} exceeds token_count {}",
                self.id, self.expected_entities, self.token_count
            )));
        }
        Ok(())
    }
}

/// A simulated crowd worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: WorkerId,
    /// Private skill level in `[0, 1]`.
    pub skill: f64,
    /// Annotation rate (per second) while ranked inside the reward spread.
    pub lambda_in: f64,
    /// Annotation rate (per second) while ranked outside the reward spread.
    pub lambda_out: f64,
    /// Linear cost coefficient: `c(effort) = cost_per_effort * effort`.
    pub cost_per_effort: f64,
    /// Normalised rank gap the worker tolerates before the exit hazard
    /// switches on. `0` means any gap counts.
    pub exit_threshold: f64,
}

impl WorkerProfile {
    pub fn new(id: u32, skill: f64, lambda_in: f64, lambda_out: f64) -> Self {
        WorkerProfile {
            id: WorkerId(id),
            skill,
            lambda_in,
            lambda_out,
            cost_per_effort: 0.01,
            exit_threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.skill) {
            return Err(Error::Config(format!(
                "{}: skill {} outside [0,1]",
                self.id, self.skill
            )));
        }
        if !(self.lambda_in > 0.0 && self.lambda_in.is_finite()) {
            return Err(Error::Config(format!(
                "{}: lambda_in must be positive",
                self.id
            )));
        }
        if !(self.lambda_out > 0.0 && self.lambda_out.is_finite()) {
            return Err(Error::Config(format!(
                "{}: lambda_out must be positive",
                self.id
            )));
        }
        if !(self.cost_per_effort >= 0.0 && self.cost_per_effort.is_finite()) {
            return Err(Error::Config(format!(
                "{}: cost_per_effort must be >= 0",
                self.id
            )));
        }
        if !(0.0..=1.0).contains(&self.exit_threshold) {
            return Err(Error::Config(format!(
                "{}: exit_threshold outside [0,1]",
                self.id
            )));
        }
        Ok(())
    }

    pub fn cost(&self, effort: f64) -> f64 {
        self.cost_per_effort * effort
    }
}

/// Requester parameters of one contest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestConfig {
    pub n_workers: u32,
    pub n_posts: u64,
    pub window_size: u32,
    /// Seconds a window slice stays on screen.
    pub task_unit_time_s: f64,
    /// Tasks visible to one worker at once.
    pub task_unit_size: u32,
    /// Tasks channelled to the platform per second.
    pub arrival_rate: f64,
    pub reward_spread: u32,
    pub prize_value: f64,
    pub base_points: u32,
    pub leaderboard_k: u32,
    /// Minimum number of annotations for a worker to be payable.
    pub quality_constraint: u64,
    pub reduction_rate: f64,
}

impl ContestConfig {
    /// The 100-worker setup of the original field experiment.
    pub fn field_defaults() -> Self {
        ContestConfig {
            n_workers: 100,
            n_posts: 7600,
            window_size: 200,
            task_unit_time_s: 10.0,
            task_unit_size: 10,
            arrival_rate: 20.0,
            reward_spread: 10,
            prize_value: 0.10,
            base_points: 10,
            leaderboard_k: 3,
            quality_constraint: 0,
            reduction_rate: 10.0,
        }
    }

    /// The field setup scaled down five-fold in workers, posts and window
    /// size. Contest duration (380 s) and load per worker are unchanged.
    pub fn scaled_defaults() -> Self {
        ContestConfig {
            n_workers: 20,
            n_posts: 1520,
            window_size: 40,
            arrival_rate: 4.0,
            ..Self::field_defaults()
        }
    }

    /// Tasks one worker clears per second when working through a full bin.
    pub fn service_rate(&self) -> f64 {
        f64::from(self.task_unit_size) / self.task_unit_time_s
    }

    /// Contest duration in whole milliseconds of virtual time.
    pub fn duration_ms(&self) -> u64 {
        let t = crate::stream::total_contest_time(
            self.n_posts,
            self.task_unit_time_s,
            self.window_size,
        );
        (t * 1000.0).round() as u64
    }

    pub fn window_ms(&self) -> u64 {
        (self.task_unit_time_s * 1000.0).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_workers", self.n_workers as f64),
            ("n_posts", self.n_posts as f64),
            ("window_size", self.window_size as f64),
            ("task_unit_time_s", self.task_unit_time_s),
            ("task_unit_size", self.task_unit_size as f64),
            ("arrival_rate", self.arrival_rate),
            ("reward_spread", self.reward_spread as f64),
            ("base_points", self.base_points as f64),
            ("leaderboard_k", self.leaderboard_k as f64),
            ("reduction_rate", self.reduction_rate),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.prize_value >= 0.0 && self.prize_value.is_finite()) {
            return Err(Error::Config("prize_value must be >= 0".into()));
        }
        if self.reward_spread > self.n_workers {
            return Err(Error::Config(format!(
                "reward_spread {} exceeds n_workers {}",
                self.reward_spread, self.n_workers
            )));
        }
        if self.task_unit_size > self.window_size {
            return Err(Error::Config(format!(
                "task_unit_size {} exceeds window_size {}",
                self.task_unit_size, self.window_size
            )));
        }
        if self.window_ms() == 0 {
            return Err(Error::Config(
                "task_unit_time_s below one millisecond".into(),
            ));
        }
        let load = task_intensity(self.arrival_rate, self.service_rate())?;
        if load >= f64::from(self.n_workers) {
            return Err(Error::Config(format!(
                "task intensity {load} must stay below the number of workers {}",
                self.n_workers
            )));
        }
        Ok(())
    }
}

/// `q = skill * effort + delta`.
pub fn compute_quality(skill: f64, effort: f64, delta: f64) -> f64 {
    skill * effort + delta
}

/// Prize minus linear effort cost for a winner, negative cost otherwise.
pub fn worker_utility(prize: f64, won: bool, effort: f64, cost_per_effort: f64) -> f64 {
    let cost = cost_per_effort * effort;
    if won {
        prize - cost
    } else {
        -cost
    }
}

/// Points for one submitted annotation: `5x` for matching the expected
/// entity count, `x` for any other non-empty annotation, nothing for a skip.
pub fn score_annotation(annotated_count: u32, expected_entities: u32, base_points: u32) -> u64 {
    if annotated_count == 0 {
        0
    } else if annotated_count == expected_entities {
        5 * u64::from(base_points)
    } else {
        u64::from(base_points)
    }
}

pub fn is_eligible(rank: usize, reward_spread: u32) -> bool {
    debug_assert!(rank >= 1, "ranks are 1-based");
    rank <= reward_spread as usize
}

/// Running score of one worker.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub score: f64,
    pub annotations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub worker_id: WorkerId,
    pub score: f64,
    pub annotations: u64,
    /// Virtual time of the worker's last scoring event.
    pub tie_break_stamp: u64,
}

/// Leaderboard order: score descending, then earlier last scoring event,
/// then lower worker id.
pub fn standing_order(a: (f64, u64, WorkerId), b: (f64, u64, WorkerId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    /// 1-based rank of `worker`.
    pub fn rank_of(&self, worker: WorkerId) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.worker_id == worker)
            .map(|p| p + 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, n: usize) -> &[RankEntry] {
        &self.entries[..n.min(self.entries.len())]
    }
}

/// Rank workers by score. Both maps must cover the same worker set.
pub fn rank_workers(
    tallies: &BTreeMap<WorkerId, Tally>,
    last_scored_ms: &BTreeMap<WorkerId, u64>,
) -> Result<Ranking> {
    if tallies.len() != last_scored_ms.len()
        || tallies.keys().any(|k| !last_scored_ms.contains_key(k))
    {
        return Err(Error::Config(
            "score and timestamp maps cover different workers".into(),
        ));
    }
    let mut entries: Vec<RankEntry> = tallies
        .iter()
        .map(|(&worker_id, tally)| RankEntry {
            worker_id,
            score: tally.score,
            annotations: tally.annotations,
            tie_break_stamp: last_scored_ms[&worker_id],
        })
        .collect();
    entries.sort_by(|a, b| {
        standing_order(
            (a.score, a.tie_break_stamp, a.worker_id),
            (b.score, b.tie_break_stamp, b.worker_id),
        )
    });
    Ok(Ranking { entries })
}

/// Leaderboard as seen by `worker`: up to `k` contenders above and below,
/// with their 1-based ranks.
pub fn k_neighbours_view(
    ranking: &Ranking,
    worker: WorkerId,
    k: usize,
) -> Result<Vec<(usize, &RankEntry)>> {
    let pos = ranking
        .entries
        .iter()
        .position(|e| e.worker_id == worker)
        .ok_or_else(|| Error::Lookup(format!("{worker} is not ranked")))?;
    let lo = pos.saturating_sub(k);
    let hi = (pos + k + 1).min(ranking.entries.len());
    Ok((lo..hi).map(|i| (i + 1, &ranking.entries[i])).collect())
}
