//! The contest event engine.
//!
//! Each worker is a continuous-time Markov chain over its annotation count.
//! At every one of its own annotation events the worker looks at the live
//! leaderboard, and the rate for its next holding interval is fixed from
//! that state: `lambda_in` inside the reward spread, `lambda_out` outside
//! (two-state model), or `exp(theta . x)` of the standardised feature row
//! (log-linear model). The stream engine decides which post each event lands
//! on: the worker's own bin first, then the oldest unclaimed post of the open
//! window, otherwise an overlapping annotation of a post already on screen.
//!
//! Time is virtual and counted in whole milliseconds. At equal timestamps the
//! engine processes annotations first (lowest worker index first), then window
//! closes, window opens, exit checkpoints and finally the contest end.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contest::{
    is_eligible, rank_workers, score_annotation, standing_order, ContestConfig, Post, Tally,
    WorkerId, WorkerProfile,
};
use crate::error::{Error, Result};
use crate::inference::features::{dot, FeatureScaling, FeatureVector, FEATURE_DIM};
use crate::sim::exit::ExitModel;
use crate::sim::log::{AnnotationEvent, CensoredInterval, EventLog, ExitEvent};
use crate::sim::sampling::{holding_time, open_unit, to_whole_ms, worker_stream, Purpose, SimRng};
use crate::stream::{
    advance_queue, build_windows, solve_from, DropQueue, OpenAssignment, RoundRobin, Window,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateModel {
    /// Constant rate per eligibility state, taken from the worker profiles.
    TwoState,
    /// `log rate = theta_w . x` with one coefficient vector per worker.
    LogLinear { theta: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub rate_model: RateModel,
    pub exit: ExitModel,
    /// Added to a worker's skill to get the chance of labelling a post with
    /// its expected entity count.
    pub accuracy_floor: f64,
    /// Stop the contest once this many annotations were made in total.
    pub annotation_cap: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rate_model: RateModel::TwoState,
            exit: ExitModel::default(),
            accuracy_floor: 0.0,
            annotation_cap: None,
        }
    }
}

impl SimOptions {
    pub fn without_exits() -> Self {
        SimOptions {
            exit: ExitModel::disabled(),
            ..Self::default()
        }
    }
}

/// Entity count a worker submits for `post`: the expected count with
/// probability `clamp(skill + accuracy_floor, 0, 1)`, otherwise the expected
/// count moved one step up or down (floored at zero).
pub fn simulate_annotated_count<R: Rng + ?Sized>(
    post: &Post,
    profile: &WorkerProfile,
    accuracy_floor: f64,
    rng: &mut R,
) -> u32 {
    let p_correct = (profile.skill + accuracy_floor).clamp(0.0, 1.0);
    let hit = rng.random::<f64>() < p_correct;
    let up = rng.random::<bool>();
    if hit {
        post.expected_entities
    } else if up {
        post.expected_entities + 1
    } else {
        post.expected_entities.saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    due_ms: u64,
    features: FeatureVector,
}

struct WorkerState {
    active: bool,
    interval: Option<Interval>,
    last_event_ms: u64,
    next_index: u64,
    tally: Tally,
    last_scored_ms: u64,
    overlap_seen: usize,
    hold_rng: SimRng,
    label_rng: SimRng,
    exit_rng: SimRng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SystemKind {
    WindowClose(u64),
    WindowOpen(u64),
    Checkpoint(u32),
    End,
}

impl SystemKind {
    fn order(&self) -> u8 {
        match self {
            SystemKind::WindowClose(_) => 0,
            SystemKind::WindowOpen(_) => 1,
            SystemKind::Checkpoint(_) => 2,
            SystemKind::End => 3,
        }
    }
}

/// Simulate one contest with the default options (two-state rates,
/// calibrated exits).
pub fn run_contest(
    config: &ContestConfig,
    profiles: &[WorkerProfile],
    posts: &[Post],
    seed: u64,
) -> Result<EventLog> {
    run_contest_with(config, profiles, posts, seed, &SimOptions::default())
}

pub fn run_contest_with(
    config: &ContestConfig,
    profiles: &[WorkerProfile],
    posts: &[Post],
    seed: u64,
    options: &SimOptions,
) -> Result<EventLog> {
    validate_inputs(config, profiles, posts, options)?;
    Contest::new(config, profiles, posts, seed, options).run()
}

fn validate_inputs(
    config: &ContestConfig,
    profiles: &[WorkerProfile],
    posts: &[Post],
    options: &SimOptions,
) -> Result<()> {
    config.validate()?;
    options.exit.validate()?;
    if profiles.len() != config.n_workers as usize {
        return Err(Error::Config(format!(
            "{} profiles for {} workers",
            profiles.len(),
            config.n_workers
        )));
    }
    if posts.len() as u64 != config.n_posts {
        return Err(Error::Config(format!(
            "{} posts for n_posts = {}",
            posts.len(),
            config.n_posts
        )));
    }
    let mut ids: Vec<WorkerId> = profiles.iter().map(|p| p.id).collect();
    ids.sort();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("duplicate worker ids".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    let mut post_ids: Vec<_> = posts.iter().map(|p| p.id).collect();
    post_ids.sort();
    if post_ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("duplicate post ids".into()));
    }
    for p in posts {
        p.validate()?;
    }
    if !(0.0..=1.0).contains(&options.accuracy_floor) {
        return Err(Error::Config("accuracy_floor outside [0,1]".into()));
    }
    if options.annotation_cap == Some(0) {
        return Err(Error::Config("annotation_cap must be positive".into()));
    }
    if let RateModel::LogLinear { theta } = &options.rate_model {
        if theta.len() != profiles.len() || theta.iter().any(|t| t.len() != FEATURE_DIM) {
            return Err(Error::Config(format!(
                "log-linear rate model needs {} coefficient vectors of length {FEATURE_DIM}",
                profiles.len()
            )));
        }
    }
    Ok(())
}

struct Contest<'a> {
    config: &'a ContestConfig,
    profiles: &'a [WorkerProfile],
    options: &'a SimOptions,
    seed: u64,
    ids: Vec<WorkerId>,
    workers: Vec<WorkerState>,
    order: Vec<usize>,
    rank_pos: Vec<usize>,
    windows: Vec<Window>,
    window_solved: Vec<Post>,
    queue: DropQueue,
    open: Vec<OpenAssignment>,
    dispatcher: RoundRobin,
    system: Vec<(u64, SystemKind)>,
    scaling: FeatureScaling,
    contest_ms: u64,
    window_ms: u64,
    total_events: u64,
    events: Vec<AnnotationEvent>,
    exits: Vec<ExitEvent>,
    censored: Vec<CensoredInterval>,
    active_at_checkpoints: Vec<u32>,
}

impl<'a> Contest<'a> {
    fn new(
        config: &'a ContestConfig,
        profiles: &'a [WorkerProfile],
        posts: &[Post],
        seed: u64,
        options: &'a SimOptions,
    ) -> Self {
        let n = profiles.len();
        let contest_ms = config.duration_ms();
        let window_ms = config.window_ms();
        let windows = build_windows(posts, config.window_size, config.task_unit_time_s);

        let mut system = Vec::new();
        for w in &windows {
            let open = w.open_ms(window_ms);
            if open < contest_ms {
                system.push((open, SystemKind::WindowOpen(w.index)));
            }
            let close = w.close_ms(window_ms);
            if close <= contest_ms {
                system.push((close, SystemKind::WindowClose(w.index)));
            }
        }
        if options.exit.is_enabled() {
            let k = u64::from(options.exit.checkpoints);
            for c in 1..=k {
                system.push((c * contest_ms / k, SystemKind::Checkpoint(c as u32)));
            }
        }
        system.push((contest_ms, SystemKind::End));
        system.sort_by_key(|&(t, kind)| (t, kind.order(), kind));
        system.reverse();

        let workers = (0..n)
            .map(|i| WorkerState {
                active: true,
                interval: None,
                last_event_ms: 0,
                next_index: 0,
                tally: Tally::default(),
                last_scored_ms: 0,
                overlap_seen: 0,
                hold_rng: worker_stream(seed, i, Purpose::Holding),
                label_rng: worker_stream(seed, i, Purpose::Annotation),
                exit_rng: worker_stream(seed, i, Purpose::Exit),
            })
            .collect();

        let ids: Vec<WorkerId> = profiles.iter().map(|p| p.id).collect();
        let annotation_budget = options.annotation_cap.unwrap_or(config.n_posts);
        let mut contest = Contest {
            config,
            profiles,
            options,
            seed,
            ids,
            workers,
            order: (0..n).collect(),
            rank_pos: vec![0; n],
            windows,
            window_solved: Vec::new(),
            queue: DropQueue::new(),
            open: Vec::new(),
            dispatcher: RoundRobin::new(),
            system,
            scaling: FeatureScaling {
                n_workers: config.n_workers,
                contest_ms,
                annotation_budget,
            },
            contest_ms,
            window_ms,
            total_events: 0,
            events: Vec::new(),
            exits: Vec::new(),
            censored: Vec::new(),
            active_at_checkpoints: vec![n as u32],
        };
        contest.rerank();
        contest
    }

    fn rerank(&mut self) {
        let (workers, ids) = (&self.workers, &self.ids);
        self.order.sort_by(|&a, &b| {
            standing_order(
                (workers[a].tally.score, workers[a].last_scored_ms, ids[a]),
                (workers[b].tally.score, workers[b].last_scored_ms, ids[b]),
            )
        });
        for (pos, &i) in self.order.iter().enumerate() {
            self.rank_pos[i] = pos;
        }
    }

    fn rank(&self, i: usize) -> u32 {
        self.rank_pos[i] as u32 + 1
    }

    fn annotations_remaining(&self) -> u64 {
        match self.options.annotation_cap {
            Some(cap) => cap.saturating_sub(self.total_events),
            None => self
                .config
                .n_posts
                .saturating_sub(self.queue.solved_count + self.queue.dropped_count),
        }
    }

    fn start_interval(&mut self, i: usize, now_ms: u64) -> Result<()> {
        let rank = self.rank(i);
        let eligible = is_eligible(rank as usize, self.config.reward_spread);
        let features = FeatureVector {
            rank,
            elapsed_time_ms: now_ms,
            annotations_remaining: self.annotations_remaining(),
            eligible,
        };
        let profile = &self.profiles[i];
        let (base, modulation) = match &self.options.rate_model {
            RateModel::TwoState => (
                if eligible {
                    profile.lambda_in
                } else {
                    profile.lambda_out
                },
                1.0,
            ),
            RateModel::LogLinear { theta } => {
                (1.0, dot(&theta[i], &features.design(&self.scaling)).exp())
            }
        };
        let tau = holding_time(base, modulation, &mut self.workers[i].hold_rng)?;
        let w = &mut self.workers[i];
        w.interval = Some(Interval {
            due_ms: now_ms.saturating_add(to_whole_ms(tau)),
            features,
        });
        Ok(())
    }

    fn next_completion(&self) -> Option<(usize, u64)> {
        let mut best: Option<(usize, u64)> = None;
        for (i, w) in self.workers.iter().enumerate() {
            if let (true, Some(iv)) = (w.active, w.interval) {
                if best.is_none_or(|(_, t)| iv.due_ms < t) {
                    best = Some((i, iv.due_ms));
                }
            }
        }
        best
    }

    fn pick_post(&mut self, i: usize) -> Result<Post> {
        let me = self.ids[i];
        let fresh = match self
            .open
            .iter_mut()
            .find(|b| b.assignment.worker_id == me && !b.unsolved.is_empty())
        {
            Some(bin) => solve_from(&mut self.queue, bin),
            None => self.queue.take_front(),
        };
        if let Some(post) = fresh {
            self.window_solved.push(post.clone());
            return Ok(post);
        }
        if self.window_solved.is_empty() {
            // Nothing solved on screen yet: help on the fullest open bin.
            let bin = self
                .open
                .iter_mut()
                .filter(|b| !b.unsolved.is_empty())
                .max_by_key(|b| (b.unsolved.len(), std::cmp::Reverse(b.assignment.worker_id)))
                .ok_or_else(|| Error::Invariant("no post left to annotate".into()))?;
            let post = bin.unsolved.pop_back().expect("non-empty bin");
            self.queue.solved_count += 1;
            self.window_solved.push(post.clone());
            return Ok(post);
        }
        // Overlapping annotation of a post already solved in this window.
        let state = &mut self.workers[i];
        let at = (i * self.config.task_unit_size as usize + state.overlap_seen)
            % self.window_solved.len();
        state.overlap_seen += 1;
        Ok(self.window_solved[at].clone())
    }

    fn complete(&mut self, i: usize, now_ms: u64) -> Result<()> {
        let interval = self.workers[i]
            .interval
            .take()
            .ok_or_else(|| Error::Invariant("completion without an interval".into()))?;
        let post = self.pick_post(i)?;
        let profile = &self.profiles[i];
        let count = simulate_annotated_count(
            &post,
            profile,
            self.options.accuracy_floor,
            &mut self.workers[i].label_rng,
        );
        let points = score_annotation(count, post.expected_entities, self.config.base_points);

        let w = &mut self.workers[i];
        let event = AnnotationEvent {
            worker_id: profile.id,
            event_index: w.next_index,
            event_time_ms: now_ms,
            holding_time_ms: now_ms - w.last_event_ms,
            post_id: post.id,
            annotated_count: count,
            points,
            rank_at_event: interval.features.rank,
            eligible_at_event: interval.features.eligible,
            annotations_remaining: interval.features.annotations_remaining,
        };
        debug_assert_eq!(interval.features.elapsed_time_ms, w.last_event_ms);
        w.next_index += 1;
        w.last_event_ms = now_ms;
        w.tally.score += points as f64;
        w.tally.annotations += 1;
        if points > 0 {
            w.last_scored_ms = now_ms;
        }
        self.events.push(event);
        self.total_events += 1;
        self.rerank();
        self.start_interval(i, now_ms)
    }

    fn open_window(&mut self, k: u64) -> Result<()> {
        let idx = k as usize;
        let close = self.windows[idx].close_ms(self.window_ms);
        self.queue.ingest(&self.windows[idx], close);
        let active: Vec<WorkerId> = {
            let mut v: Vec<WorkerId> = (0..self.workers.len())
                .filter(|&i| self.workers[i].active)
                .map(|i| self.ids[i])
                .collect();
            v.sort();
            v
        };
        let allocation =
            self.dispatcher
                .allocate(&self.windows[idx], &active, self.config.task_unit_size);
        let bins = self.queue.dispatch(&allocation)?;
        self.open.extend(bins);
        self.window_solved.clear();
        for w in &mut self.workers {
            w.overlap_seen = 0;
        }
        Ok(())
    }

    fn checkpoint(&mut self, c: u32, now_ms: u64) {
        let model = self.options.exit;
        let elapsed = f64::from(c) / f64::from(model.checkpoints);
        let spread = self.config.reward_spread;
        for i in 0..self.workers.len() {
            if !self.workers[i].active {
                continue;
            }
            let rank = self.rank(i);
            let eligible = is_eligible(rank as usize, spread);
            let gap = rank.saturating_sub(spread + 1);
            let h = model.hazard(
                eligible,
                gap,
                self.config.n_workers,
                elapsed,
                &self.profiles[i],
            );
            let u = open_unit(&mut self.workers[i].exit_rng);
            if u <= h && h > 0.0 {
                self.workers[i].active = false;
                self.censor(i, now_ms);
                self.exits.push(ExitEvent {
                    worker_id: self.ids[i],
                    exit_time_ms: now_ms,
                    rank_at_exit: rank,
                    eligible_at_exit: eligible,
                });
                let me = self.ids[i];
                let (mine, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.open)
                    .into_iter()
                    .partition(|b| b.assignment.worker_id == me);
                self.open = rest;
                for bin in mine {
                    self.queue.requeue(bin.unsolved, bin.closes_at_ms);
                }
            }
        }
        let active = self.workers.iter().filter(|w| w.active).count() as u32;
        self.active_at_checkpoints.push(active);
    }

    fn censor(&mut self, i: usize, end_ms: u64) {
        if let Some(iv) = self.workers[i].interval.take() {
            self.censored.push(CensoredInterval {
                worker_id: self.ids[i],
                start_ms: iv.features.elapsed_time_ms,
                end_ms,
                rank: iv.features.rank,
                eligible: iv.features.eligible,
                annotations_remaining: iv.features.annotations_remaining,
            });
        }
    }

    fn check_conservation(&self) -> Result<()> {
        let acc = self.queue.accounting(&self.open);
        if acc.is_conserved() {
            Ok(())
        } else {
            Err(Error::Invariant(format!(
                "stream accounting not conserved: {acc:?}"
            )))
        }
    }

    fn run(mut self) -> Result<EventLog> {
        for i in 0..self.workers.len() {
            self.start_interval(i, 0)?;
        }
        let mut ended_at = self.contest_ms;
        loop {
            let (sys_time, sys_kind) = *self
                .system
                .last()
                .expect("end event is never popped before break");
            match self.next_completion() {
                Some((i, t)) if t <= sys_time => {
                    self.complete(i, t)?;
                    if self.options.annotation_cap == Some(self.total_events) {
                        ended_at = t;
                        break;
                    }
                }
                _ => {
                    self.system.pop();
                    match sys_kind {
                        SystemKind::WindowClose(_) => {
                            advance_queue(&mut self.queue, sys_time, &mut self.open)?;
                        }
                        SystemKind::WindowOpen(k) => self.open_window(k)?,
                        SystemKind::Checkpoint(c) => self.checkpoint(c, sys_time),
                        SystemKind::End => break,
                    }
                }
            }
            self.check_conservation()?;
        }

        for i in 0..self.workers.len() {
            self.censor(i, ended_at);
        }
        self.censored.sort_by_key(|c| c.worker_id);

        // The contest end closes whatever is still on screen.
        advance_queue(&mut self.queue, u64::MAX, &mut self.open)?;
        self.check_conservation()?;

        let checkpoints = self.options.exit.checkpoints as usize;
        let active_now = self.workers.iter().filter(|w| w.active).count() as u32;
        self.active_at_checkpoints
            .resize(checkpoints + 1, active_now);

        let tallies = self
            .ids
            .iter()
            .zip(&self.workers)
            .map(|(&id, w)| (id, w.tally))
            .collect();
        let stamps = self
            .ids
            .iter()
            .zip(&self.workers)
            .map(|(&id, w)| (id, w.last_scored_ms))
            .collect();
        let final_ranking = rank_workers(&tallies, &stamps)?;

        Ok(EventLog {
            seed: self.seed,
            config: self.config.clone(),
            profiles: self.profiles.to_vec(),
            options: self.options.clone(),
            contest_ms: self.contest_ms,
            annotation_budget: self.scaling.annotation_budget,
            stream: self.queue.accounting(&self.open),
            events: self.events,
            exits: self.exits,
            censored: self.censored,
            final_ranking,
            active_at_checkpoints: self.active_at_checkpoints,
            ended_at_ms: ended_at,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::sampling::substream;

    fn posts(n: u64) -> Vec<Post> {
        (0..n)
            .map(|i| Post::new(i, 12, (i % 3) as u32, i).unwrap())
            .collect()
    }

    fn small_config(n_workers: u32, spread: u32) -> ContestConfig {
        ContestConfig {
            n_workers,
            n_posts: 100,
            window_size: 20,
            task_unit_time_s: 10.0,
            task_unit_size: 5,
            arrival_rate: 0.2,
            reward_spread: spread,
            ..ContestConfig::scaled_defaults()
        }
    }

    fn profiles(n: u32) -> Vec<WorkerProfile> {
        (0..n)
            .map(|i| {
                WorkerProfile::new(i, 0.6, 1.0 + 0.1 * f64::from(i), 1.3 - 0.05 * f64::from(i))
            })
            .collect()
    }

    #[test]
    fn log_replays_and_is_deterministic() {
        let cfg = small_config(6, 2);
        let opts = SimOptions {
            exit: ExitModel::with_base_hazard(0.5),
            ..SimOptions::default()
        };
        let a = run_contest_with(&cfg, &profiles(6), &posts(100), 42, &opts).unwrap();
        let b = run_contest_with(&cfg, &profiles(6), &posts(100), 42, &opts).unwrap();
        assert_eq!(a, b);
        a.verify().unwrap();
        assert_eq!(a.active_at_checkpoints.len(), 21);
        assert!(!a.events.is_empty());
        let c = run_contest_with(&cfg, &profiles(6), &posts(100), 43, &opts).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn single_worker_always_eligible() {
        let cfg = small_config(1, 1);
        let log = run_contest(&cfg, &profiles(1), &posts(100), 1).unwrap();
        log.verify().unwrap();
        assert!(log
            .events
            .iter()
            .all(|e| e.eligible_at_event && e.rank_at_event == 1));
        assert!(log.exits.is_empty());
    }

    #[test]
    fn full_spread_has_no_exits() {
        let cfg = small_config(5, 5);
        let opts = SimOptions {
            exit: ExitModel::with_base_hazard(1.0),
            ..SimOptions::default()
        };
        let log = run_contest_with(&cfg, &profiles(5), &posts(100), 9, &opts).unwrap();
        assert!(log.exits.is_empty());
        assert!(log.events.iter().all(|e| e.eligible_at_event));
    }

    #[test]
    fn harsh_hazard_removes_workers_for_good() {
        let cfg = small_config(8, 1);
        let opts = SimOptions {
            exit: ExitModel::with_base_hazard(1.0),
            ..SimOptions::default()
        };
        let log = run_contest_with(&cfg, &profiles(8), &posts(100), 5, &opts).unwrap();
        log.verify().unwrap();
        assert!(!log.exits.is_empty());
        for x in &log.exits {
            assert!(!x.eligible_at_exit);
            assert!(log
                .events
                .iter()
                .all(|e| e.worker_id != x.worker_id || e.event_time_ms <= x.exit_time_ms));
        }
    }

    #[test]
    fn annotation_cap_stops_the_race() {
        let cfg = ContestConfig {
            n_workers: 5,
            n_posts: 100,
            window_size: 100,
            task_unit_time_s: 200.0,
            task_unit_size: 20,
            arrival_rate: 0.4,
            reward_spread: 1,
            ..ContestConfig::scaled_defaults()
        };
        let opts = SimOptions {
            annotation_cap: Some(100),
            ..SimOptions::without_exits()
        };
        let log = run_contest_with(&cfg, &profiles(5), &posts(100), 3, &opts).unwrap();
        log.verify().unwrap();
        assert_eq!(log.events.len(), 100);
        assert_eq!(log.ended_at_ms, log.events.last().unwrap().event_time_ms);
        assert!(log
            .events
            .iter()
            .all(|e| (1..=100).contains(&e.annotations_remaining)));
    }

    #[test]
    fn log_linear_mode_runs() {
        let cfg = small_config(3, 1);
        let theta = vec![vec![0.1, 0.0, 0.0, 0.0, 0.3]; 3];
        let opts = SimOptions {
            rate_model: RateModel::LogLinear { theta },
            ..SimOptions::without_exits()
        };
        let log = run_contest_with(&cfg, &profiles(3), &posts(100), 8, &opts).unwrap();
        log.verify().unwrap();

        let bad = SimOptions {
            rate_model: RateModel::LogLinear {
                theta: vec![vec![0.0; 4]; 3],
            },
            ..SimOptions::default()
        };
        assert!(matches!(
            run_contest_with(&cfg, &profiles(3), &posts(100), 8, &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_bad_inputs_before_simulating() {
        let cfg = small_config(3, 1);
        assert!(matches!(
            run_contest(&cfg, &profiles(2), &posts(100), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_contest(&cfg, &profiles(3), &posts(99), 0),
            Err(Error::Config(_))
        ));
        let mut bad = cfg.clone();
        bad.reward_spread = 4;
        assert!(matches!(
            run_contest(&bad, &profiles(3), &posts(100), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn annotated_count_examples() {
        let post = Post::new(0, 10, 3, 0).unwrap();
        let perfect = WorkerProfile::new(0, 1.0, 1.0, 1.0);
        let mut rng = substream(1, 0);
        assert!((0..1000).all(|_| simulate_annotated_count(&post, &perfect, 0.0, &mut rng) == 3));

        let clueless = WorkerProfile::new(0, 0.0, 1.0, 1.0);
        assert!((0..1000).all(|_| simulate_annotated_count(&post, &clueless, 0.0, &mut rng) != 3));
        // with no entities, a downward perturbation lands on the truth
        let empty = Post::new(1, 10, 0, 1).unwrap();
        let hits = (0..10_000)
            .filter(|_| simulate_annotated_count(&empty, &clueless, 0.0, &mut rng) == 0)
            .count();
        assert!((4_500..5_500).contains(&hits));

        let half = WorkerProfile::new(0, 0.5, 1.0, 1.0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| simulate_annotated_count(&post, &half, 0.0, &mut rng) == 3)
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }
}
