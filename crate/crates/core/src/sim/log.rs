//! Event logs: the complete, replayable record of one simulated contest and
//! the only input the inference engine needs.
//!
//! On disk a log is line-delimited JSON: one header record carrying the
//! configuration and seed, one record per annotation or exit, and a trailer
//! with the final standings and stream accounting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::contest::{
    is_eligible, rank_workers, standing_order, ContestConfig, PostId, Ranking, Tally, WorkerId,
    WorkerProfile,
};
use crate::error::{Error, Result};
use crate::sim::engine::SimOptions;
use crate::stream::StreamAccounting;

pub const LOG_FORMAT_VERSION: u32 = 1;

/// One completed annotation. `rank` and `eligible` describe the worker at
/// the start of the holding interval that this event ends; they set the
/// rate the interval was drawn at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub worker_id: WorkerId,
    pub event_index: u64,
    pub event_time_ms: u64,
    pub holding_time_ms: u64,
    pub post_id: PostId,
    pub annotated_count: u32,
    pub points: u64,
    #[serde(rename = "rank")]
    pub rank_at_event: u32,
    #[serde(rename = "eligible")]
    pub eligible_at_event: bool,
    pub annotations_remaining: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub worker_id: WorkerId,
    pub exit_time_ms: u64,
    pub rank_at_exit: u32,
    pub eligible_at_exit: bool,
}

/// The holding interval a worker was in when the contest ended or the worker
/// left. It carries exposure time but no event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredInterval {
    pub worker_id: WorkerId,
    pub start_ms: u64,
    pub end_ms: u64,
    pub rank: u32,
    pub eligible: bool,
    pub annotations_remaining: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub seed: u64,
    pub config: ContestConfig,
    pub profiles: Vec<WorkerProfile>,
    pub options: SimOptions,
    pub contest_ms: u64,
    pub annotation_budget: u64,
    pub events: Vec<AnnotationEvent>,
    pub exits: Vec<ExitEvent>,
    pub censored: Vec<CensoredInterval>,
    pub final_ranking: Ranking,
    pub stream: StreamAccounting,
    /// Workers still in the contest at 0%, 5%, ..., 100% of its duration.
    pub active_at_checkpoints: Vec<u32>,
    pub ended_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogHeader {
    format_version: u32,
    seed: u64,
    config: ContestConfig,
    profiles: Vec<WorkerProfile>,
    options: SimOptions,
    contest_ms: u64,
    annotation_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogTrailer {
    final_ranking: Ranking,
    stream: StreamAccounting,
    active_at_checkpoints: Vec<u32>,
    ended_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogRecord {
    Header(LogHeader),
    Annotation(AnnotationEvent),
    Exit(ExitEvent),
    Censored(CensoredInterval),
    Trailer(LogTrailer),
}

impl EventLog {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = LogRecord::Header(LogHeader {
            format_version: LOG_FORMAT_VERSION,
            seed: self.seed,
            config: self.config.clone(),
            profiles: self.profiles.clone(),
            options: self.options.clone(),
            contest_ms: self.contest_ms,
            annotation_budget: self.annotation_budget,
        });
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut out, &LogRecord::Annotation(e.clone()))?;
            out.write_all(b"\n")?;
        }
        for e in &self.exits {
            serde_json::to_writer(&mut out, &LogRecord::Exit(e.clone()))?;
            out.write_all(b"\n")?;
        }
        for c in &self.censored {
            serde_json::to_writer(&mut out, &LogRecord::Censored(c.clone()))?;
            out.write_all(b"\n")?;
        }
        let trailer = LogRecord::Trailer(LogTrailer {
            final_ranking: self.final_ranking.clone(),
            stream: self.stream,
            active_at_checkpoints: self.active_at_checkpoints.clone(),
            ended_at_ms: self.ended_at_ms,
        });
        serde_json::to_writer(&mut out, &trailer)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_jsonl_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(buf)
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut header = None;
        let mut trailer = None;
        let mut events = Vec::new();
        let mut exits = Vec::new();
        let mut censored = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Input(format!("event log line {}: {e}", lineno + 1)))?;
            match record {
                LogRecord::Header(h) if header.is_none() && lineno == 0 => header = Some(h),
                LogRecord::Header(_) => {
                    return Err(Error::Input(
                        "header must be the first and only header line".into(),
                    ))
                }
                LogRecord::Annotation(e) => events.push(e),
                LogRecord::Exit(e) => exits.push(e),
                LogRecord::Censored(c) => censored.push(c),
                LogRecord::Trailer(t) => trailer = Some(t),
            }
        }
        let header = header.ok_or_else(|| Error::Input("event log has no header".into()))?;
        if header.format_version != LOG_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "event log format version {} not supported (expected {LOG_FORMAT_VERSION})",
                header.format_version
            )));
        }
        let trailer = trailer.ok_or_else(|| Error::Input("event log has no trailer".into()))?;
        Ok(EventLog {
            seed: header.seed,
            config: header.config,
            profiles: header.profiles,
            options: header.options,
            contest_ms: header.contest_ms,
            annotation_budget: header.annotation_budget,
            events,
            exits,
            censored,
            final_ranking: trailer.final_ranking,
            stream: trailer.stream,
            active_at_checkpoints: trailer.active_at_checkpoints,
            ended_at_ms: trailer.ended_at_ms,
        })
    }

    pub fn worker_ids(&self) -> Vec<WorkerId> {
        self.profiles.iter().map(|p| p.id).collect()
    }

    /// Events of one worker in time order.
    pub fn events_of(&self, worker: WorkerId) -> Vec<AnnotationEvent> {
        self.events
            .iter()
            .filter(|e| e.worker_id == worker)
            .cloned()
            .collect()
    }

    pub fn annotations_by_worker(&self) -> BTreeMap<WorkerId, u64> {
        let mut out: BTreeMap<WorkerId, u64> =
            self.worker_ids().into_iter().map(|w| (w, 0)).collect();
        for e in &self.events {
            *out.entry(e.worker_id).or_default() += 1;
        }
        out
    }

    /// Replay the log and check every structural invariant: per-worker time
    /// recursion and event numbering, eligibility against the replayed
    /// leaderboard, exit irreversibility, the final ranking and the
    /// conservation of posts.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let spread = self.config.reward_spread;
        let index_of: BTreeMap<WorkerId, usize> = self
            .profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id, i))
            .collect();
        if index_of.len() != self.profiles.len() {
            return fail("duplicate worker ids in header".into());
        }
        let n = self.profiles.len();

        let mut exit_at: BTreeMap<WorkerId, &ExitEvent> = BTreeMap::new();
        for x in &self.exits {
            if exit_at.insert(x.worker_id, x).is_some() {
                return fail(format!("{} exits twice", x.worker_id));
            }
        }

        // Leaderboard replay.
        let mut tallies = vec![Tally::default(); n];
        let mut stamps = vec![0u64; n];
        let mut order: Vec<usize> = (0..n).collect();
        let ids: Vec<WorkerId> = self.profiles.iter().map(|p| p.id).collect();
        let resort = |order: &mut Vec<usize>, tallies: &[Tally], stamps: &[u64]| {
            order.sort_by(|&a, &b| {
                standing_order(
                    (tallies[a].score, stamps[a], ids[a]),
                    (tallies[b].score, stamps[b], ids[b]),
                )
            });
        };
        resort(&mut order, &tallies, &stamps);
        let rank_of =
            |order: &[usize], i: usize| order.iter().position(|&j| j == i).unwrap() as u32 + 1;
        let mut expected_rank: Vec<u32> = (0..n).map(|i| rank_of(&order, i)).collect();

        let mut last_time = vec![0u64; n];
        let mut next_index = vec![0u64; n];
        let mut prev_global = 0u64;
        let mut exits_sorted: Vec<&ExitEvent> = self.exits.iter().collect();
        exits_sorted.sort_by_key(|x| (x.exit_time_ms, index_of.get(&x.worker_id).copied()));
        let mut exit_cursor = 0;

        let check_exits_until = |t: u64, cursor: &mut usize, order: &[usize]| -> Result<()> {
            while *cursor < exits_sorted.len() && exits_sorted[*cursor].exit_time_ms < t {
                let x = exits_sorted[*cursor];
                let i = index_of[&x.worker_id];
                let r = rank_of(order, i);
                if r != x.rank_at_exit || is_eligible(r as usize, spread) != x.eligible_at_exit {
                    return Err(Error::Invariant(format!(
                        "{} exit rank {} does not replay ({r})",
                        x.worker_id, x.rank_at_exit
                    )));
                }
                *cursor += 1;
            }
            Ok(())
        };

        for e in &self.events {
            let Some(&i) = index_of.get(&e.worker_id) else {
                return fail(format!("event for unknown {}", e.worker_id));
            };
            if e.event_time_ms < prev_global {
                return fail(format!("events out of order at {}", e.event_time_ms));
            }
            check_exits_until(e.event_time_ms, &mut exit_cursor, &order)?;
            prev_global = e.event_time_ms;
            if e.holding_time_ms == 0 {
                return fail(format!(
                    "{} event {} has zero holding time",
                    e.worker_id, e.event_index
                ));
            }
            if e.event_index != next_index[i] {
                return fail(format!(
                    "{} event index {} expected {}",
                    e.worker_id, e.event_index, next_index[i]
                ));
            }
            if e.event_time_ms != last_time[i] + e.holding_time_ms {
                return fail(format!(
                    "{} event {} breaks t(j+1) = t(j) + tau",
                    e.worker_id, e.event_index
                ));
            }
            if e.eligible_at_event != is_eligible(e.rank_at_event as usize, spread) {
                return fail(format!(
                    "{} event {} eligibility inconsistent with rank",
                    e.worker_id, e.event_index
                ));
            }
            if e.rank_at_event != expected_rank[i] {
                return fail(format!(
                    "{} event {} rank {} does not replay ({})",
                    e.worker_id, e.event_index, e.rank_at_event, expected_rank[i]
                ));
            }
            if let Some(x) = exit_at.get(&e.worker_id) {
                if e.event_time_ms > x.exit_time_ms {
                    return fail(format!("{} annotates after exiting", e.worker_id));
                }
            }
            next_index[i] += 1;
            last_time[i] = e.event_time_ms;
            tallies[i].score += e.points as f64;
            tallies[i].annotations += 1;
            if e.points > 0 {
                stamps[i] = e.event_time_ms;
            }
            resort(&mut order, &tallies, &stamps);
            expected_rank[i] = rank_of(&order, i);
        }
        check_exits_until(u64::MAX, &mut exit_cursor, &order)?;

        // Sum of holding times equals the last event time, per worker.
        let mut held = vec![0u64; n];
        for e in &self.events {
            held[index_of[&e.worker_id]] += e.holding_time_ms;
        }
        if held != last_time {
            return fail("holding times do not sum to last event times".into());
        }

        let mut seen = BTreeSet::new();
        for c in &self.censored {
            let Some(&i) = index_of.get(&c.worker_id) else {
                return fail(format!("censored interval for unknown {}", c.worker_id));
            };
            if !seen.insert(c.worker_id) {
                return fail(format!("{} has two censored intervals", c.worker_id));
            }
            if c.start_ms != last_time[i] || c.end_ms < c.start_ms {
                return fail(format!(
                    "{} censored interval does not follow its last event",
                    c.worker_id
                ));
            }
            if c.rank != expected_rank[i] || c.eligible != is_eligible(c.rank as usize, spread) {
                return fail(format!(
                    "{} censored interval rank does not replay",
                    c.worker_id
                ));
            }
        }

        let tally_map: BTreeMap<WorkerId, Tally> =
            ids.iter().copied().zip(tallies.iter().copied()).collect();
        let stamp_map: BTreeMap<WorkerId, u64> =
            ids.iter().copied().zip(stamps.iter().copied()).collect();
        if rank_workers(&tally_map, &stamp_map)? != self.final_ranking {
            return fail("final ranking does not replay".into());
        }

        if !self.stream.is_conserved() {
            return fail(format!(
                "stream accounting not conserved: {:?}",
                self.stream
            ));
        }
        let distinct: BTreeSet<PostId> = self.events.iter().map(|e| e.post_id).collect();
        if distinct.len() as u64 != self.stream.solved {
            return fail(format!(
                "{} distinct posts annotated but {} counted solved",
                distinct.len(),
                self.stream.solved
            ));
        }
        if self.active_at_checkpoints.windows(2).any(|w| w[1] > w[0]) {
            return fail("active-worker curve increases".into());
        }
        Ok(())
    }
}
