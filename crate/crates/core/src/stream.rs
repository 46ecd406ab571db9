//! Streaming task pipeline: temporal division into windows, round-robin bins
//! (stream parallelism), the FIFO drop queue, time warping and the
//! load/timing formulas a requester uses to size a contest.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::contest::{Post, PostId, WorkerId};
use crate::error::{Error, Result};

/// Ingress load `L = arrival_rate / service_rate`. A contest keeps up with
/// its stream only while `L` stays below the number of workers.
pub fn task_intensity(arrival_rate: f64, service_rate: f64) -> Result<f64> {
    if !(service_rate > 0.0) {
        return Err(Error::Domain(format!(
            "service rate must be positive, got {service_rate}"
        )));
    }
    Ok(arrival_rate / service_rate)
}

/// Contest length in seconds, `T = P * mu / w`.
pub fn total_contest_time(n_posts: u64, task_unit_time_s: f64, window_size: u32) -> f64 {
    n_posts as f64 * task_unit_time_s / f64::from(window_size)
}

/// Playback speed of the buffered out-period after a slice was shown at
/// `1/reduction_rate` speed: `(n - 1) / (n - rr)`.
pub fn warp_out_rate(n: f64, reduction_rate: f64) -> Result<f64> {
    if !(n > reduction_rate) {
        return Err(Error::Domain(format!(
            "warp undefined for n = {n} <= reduction rate {reduction_rate}"
        )));
    }
    Ok((n - 1.0) / (n - reduction_rate))
}

/// One time slice of the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub index: u64,
    pub posts: Vec<Post>,
    pub open_time_s: f64,
    pub close_time_s: f64,
}

impl Window {
    pub fn open_ms(&self, task_unit_ms: u64) -> u64 {
        self.index * task_unit_ms
    }

    pub fn close_ms(&self, task_unit_ms: u64) -> u64 {
        (self.index + 1) * task_unit_ms
    }
}

/// Bucket the stream into consecutive windows of `window_size` posts, each
/// on screen for `task_unit_time_s`.
pub fn build_windows(posts: &[Post], window_size: u32, task_unit_time_s: f64) -> Vec<Window> {
    assert!(window_size > 0, "window_size must be positive");
    posts
        .chunks(window_size as usize)
        .enumerate()
        .map(|(i, chunk)| {
            let open = i as f64 * task_unit_time_s;
            Window {
                index: i as u64,
                posts: chunk.to_vec(),
                open_time_s: open,
                close_time_s: open + task_unit_time_s,
            }
        })
        .collect()
}

/// A bin of posts handed to one worker for one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub worker_id: WorkerId,
    pub window_index: u64,
    pub bin: Vec<PostId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allocation {
    pub assignments: Vec<Assignment>,
    /// Posts left without a worker because the window holds more bins than
    /// there are workers. They drop when the window closes unless someone
    /// picks them up from the queue first.
    pub leftover: Vec<PostId>,
}

/// Round-robin dispatcher. The cursor persists across windows so bins keep
/// cycling through the worker list instead of restarting at the first id.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    last_served: Option<WorkerId>,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cut `window` into sequential bins of `task_unit_size` posts and hand
    /// them out, at most one bin per worker. `worker_ids` must be sorted.
    pub fn allocate(
        &mut self,
        window: &Window,
        worker_ids: &[WorkerId],
        task_unit_size: u32,
    ) -> Allocation {
        assert!(task_unit_size > 0, "task_unit_size must be positive");
        debug_assert!(worker_ids.windows(2).all(|w| w[0] < w[1]));
        let mut out = Allocation::default();
        if worker_ids.is_empty() {
            out.leftover = window.posts.iter().map(|p| p.id).collect();
            return out;
        }
        let start = match self.last_served {
            Some(last) => worker_ids.partition_point(|&w| w <= last) % worker_ids.len(),
            None => 0,
        };
        for (b, chunk) in window.posts.chunks(task_unit_size as usize).enumerate() {
            if b < worker_ids.len() {
                let worker_id = worker_ids[(start + b) % worker_ids.len()];
                self.last_served = Some(worker_id);
                out.assignments.push(Assignment {
                    worker_id,
                    window_index: window.index,
                    bin: chunk.iter().map(|p| p.id).collect(),
                });
            } else {
                out.leftover.extend(chunk.iter().map(|p| p.id));
            }
        }
        out
    }
}

/// Stateless round-robin starting at the first worker.
pub fn allocate_round_robin(
    window: &Window,
    worker_ids: &[WorkerId],
    task_unit_size: u32,
) -> Allocation {
    RoundRobin::new().allocate(window, worker_ids, task_unit_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueuedPost {
    pub post: Post,
    pub closes_at_ms: u64,
}

/// A bin that is still on some worker's screen.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenAssignment {
    pub assignment: Assignment,
    pub unsolved: VecDeque<Post>,
    pub closes_at_ms: u64,
}

/// Snapshot of where every ingested post currently is.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamAccounting {
    pub ingested: u64,
    pub solved: u64,
    pub dropped: u64,
    pub pending: u64,
    pub in_assignment: u64,
}

impl StreamAccounting {
    pub fn is_conserved(&self) -> bool {
        self.solved + self.dropped + self.pending + self.in_assignment == self.ingested
    }
}

/// First-in-first-out buffer of ingested posts not yet on any worker's
/// screen. Posts whose window has closed unsolved are dropped for good.
#[derive(Debug, Clone, Default)]
pub struct DropQueue {
    pending: VecDeque<QueuedPost>,
    pub dropped_count: u64,
    pub solved_count: u64,
    pub ingested_count: u64,
    clock_ms: u64,
}

impl DropQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Post> {
        self.pending.iter().map(|q| &q.post)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    /// Push a window's posts onto the back of the queue.
    pub fn ingest(&mut self, window: &Window, closes_at_ms: u64) {
        for post in &window.posts {
            self.pending.push_back(QueuedPost {
                post: post.clone(),
                closes_at_ms,
            });
        }
        self.ingested_count += window.posts.len() as u64;
    }

    /// Move the bins of `allocation` out of the queue onto workers' screens.
    pub fn dispatch(&mut self, allocation: &Allocation) -> Result<Vec<OpenAssignment>> {
        let mut open = Vec::with_capacity(allocation.assignments.len());
        for assignment in &allocation.assignments {
            let mut unsolved = VecDeque::with_capacity(assignment.bin.len());
            let mut closes_at_ms = 0;
            for id in &assignment.bin {
                let at = self
                    .pending
                    .iter()
                    .position(|q| q.post.id == *id)
                    .ok_or_else(|| Error::Lookup(format!("{id} is not pending")))?;
                let queued = self.pending.remove(at).expect("index from position");
                closes_at_ms = queued.closes_at_ms;
                unsolved.push_back(queued.post);
            }
            open.push(OpenAssignment {
                assignment: assignment.clone(),
                unsolved,
                closes_at_ms,
            });
        }
        Ok(open)
    }

    /// Pop the oldest pending post, counting it as solved.
    pub fn take_front(&mut self) -> Option<Post> {
        let q = self.pending.pop_front()?;
        self.solved_count += 1;
        Some(q.post)
    }

    /// Return unsolved posts of an abandoned bin to the queue, keeping
    /// arrival order.
    pub fn requeue(&mut self, posts: impl IntoIterator<Item = Post>, closes_at_ms: u64) {
        for post in posts {
            let at = self
                .pending
                .partition_point(|q| q.post.arrival_index < post.arrival_index);
            self.pending.insert(at, QueuedPost { post, closes_at_ms });
        }
    }

    pub fn accounting(&self, open: &[OpenAssignment]) -> StreamAccounting {
        StreamAccounting {
            ingested: self.ingested_count,
            solved: self.solved_count,
            dropped: self.dropped_count,
            pending: self.pending.len() as u64,
            in_assignment: open.iter().map(|a| a.unsolved.len() as u64).sum(),
        }
    }
}

/// Take the next unsolved post off an open bin, counting it as solved.
pub fn solve_from(queue: &mut DropQueue, bin: &mut OpenAssignment) -> Option<Post> {
    let post = bin.unsolved.pop_front()?;
    queue.solved_count += 1;
    Some(post)
}

/// Advance the queue clock to `now_ms`. Every pending post and every open
/// bin whose window has closed by `now_ms` is dropped; closed bins are
/// removed from `open`. Callers apply annotations landing exactly at a close
/// time before advancing, so those count as solved. Returns the number of
/// posts dropped by this call.
pub fn advance_queue(
    queue: &mut DropQueue,
    now_ms: u64,
    open: &mut Vec<OpenAssignment>,
) -> Result<u64> {
    if now_ms < queue.clock_ms {
        return Err(Error::Contract(format!(
            "queue clock moved backwards from {} to {now_ms}",
            queue.clock_ms
        )));
    }
    queue.clock_ms = now_ms;
    let before = queue.pending.len();
    queue.pending.retain(|q| q.closes_at_ms > now_ms);
    let mut dropped = (before - queue.pending.len()) as u64;
    open.retain(|a| {
        if a.closes_at_ms <= now_ms {
            dropped += a.unsolved.len() as u64;
            false
        } else {
            true
        }
    });
    queue.dropped_count += dropped;
    Ok(dropped)
}

/// Reduce step for overlapping annotations: majority vote on entity count
/// per post, ties going to the lower count.
pub fn merge_majority(labels: &[(PostId, u32)]) -> BTreeMap<PostId, u32> {
    let mut votes: BTreeMap<PostId, BTreeMap<u32, u32>> = BTreeMap::new();
    for &(post, count) in labels {
        *votes.entry(post).or_default().entry(count).or_default() += 1;
    }
    votes
        .into_iter()
        .map(|(post, tally)| {
            let best = tally
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&count, _)| count)
                .expect("non-empty tally");
            (post, best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn posts(n: u64) -> Vec<Post> {
        (0..n).map(|i| Post::new(i, 10, 1, i).unwrap()).collect()
    }

    fn workers(n: u32) -> Vec<WorkerId> {
        (0..n).map(WorkerId).collect()
    }

    #[test]
    fn timing_formulas() {
        assert_eq!(total_contest_time(7600, 10.0, 200), 380.0);
        assert_eq!(total_contest_time(200, 10.0, 200), 10.0);
        assert_eq!(total_contest_time(1000, 5.0, 100), 50.0);

        assert_eq!(task_intensity(20.0, 1.0).unwrap(), 20.0);
        assert_eq!(task_intensity(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(task_intensity(200.0, 10.0).unwrap(), 20.0);
        assert!(matches!(task_intensity(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(task_intensity(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn warp_examples() {
        assert_eq!(warp_out_rate(200.0, 10.0).unwrap(), 199.0 / 190.0);
        for n in [1.5, 2.0, 17.0, 1e6] {
            assert_eq!(warp_out_rate(n, 1.0).unwrap(), 1.0);
        }
        assert_eq!(warp_out_rate(11.0, 10.0).unwrap(), 10.0);
        assert!(matches!(warp_out_rate(10.0, 10.0), Err(Error::Domain(_))));
        assert!(matches!(warp_out_rate(3.0, 10.0), Err(Error::Domain(_))));
    }

    #[test]
    fn window_examples() {
        assert_eq!(build_windows(&posts(7600), 200, 10.0).len(), 38);
        let w = build_windows(&posts(1), 200, 10.0);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].posts.len(), 1);
        let w = build_windows(&posts(400), 200, 10.0);
        assert_eq!(w[0].open_time_s, 0.0);
        assert_eq!(w[1].open_time_s, 10.0);
        assert_eq!(w[1].close_time_s - w[1].open_time_s, 10.0);
        assert!(build_windows(&[], 200, 10.0).is_empty());
    }

    #[test]
    fn round_robin_examples() {
        let w = &build_windows(&posts(200), 200, 10.0)[0];
        let a = allocate_round_robin(w, &workers(20), 10);
        assert_eq!(a.assignments.len(), 20);
        assert!(a.assignments.iter().all(|x| x.bin.len() == 10));
        assert!(a.leftover.is_empty());

        let w = &build_windows(&posts(5), 200, 10.0)[0];
        let a = allocate_round_robin(w, &workers(2), 10);
        assert_eq!(a.assignments.len(), 1);
        assert_eq!(a.assignments[0].worker_id, WorkerId(0));
        assert_eq!(a.assignments[0].bin.len(), 5);

        let w = &build_windows(&posts(200), 200, 10.0)[0];
        let a = allocate_round_robin(w, &workers(100), 10);
        let served: Vec<WorkerId> = a.assignments.iter().map(|x| x.worker_id).collect();
        assert_eq!(served, workers(20));
        // bins partition the window
        let mut all: Vec<PostId> = a.assignments.iter().flat_map(|x| x.bin.clone()).collect();
        all.sort();
        assert_eq!(all, w.posts.iter().map(|p| p.id).collect::<Vec<_>>());
    }

    #[test]
    fn under_provisioned_window_leaves_posts() {
        let w = &build_windows(&posts(50), 50, 10.0)[0];
        let a = allocate_round_robin(w, &workers(3), 10);
        assert_eq!(a.assignments.len(), 3);
        assert_eq!(a.leftover.len(), 20);
    }

    #[test]
    fn cursor_cycles_across_windows() {
        let windows = build_windows(&posts(200 * 5), 200, 10.0);
        let mut rr = RoundRobin::new();
        let mut counts = BTreeMap::new();
        for w in &windows {
            for a in rr.allocate(w, &workers(100), 10).assignments {
                *counts.entry(a.worker_id).or_insert(0) += 1;
            }
        }
        assert_eq!(counts.len(), 100);
        assert!(counts.values().all(|&c| c == 1));
    }

    #[test]
    fn queue_drops_unsolved_at_close() {
        let w = &build_windows(&posts(10), 10, 10.0)[0];
        let mut q = DropQueue::new();
        q.ingest(w, 10_000);
        let alloc = allocate_round_robin(w, &workers(1), 10);
        let mut open = q.dispatch(&alloc).unwrap();
        for _ in 0..4 {
            solve_from(&mut q, &mut open[0]).unwrap();
        }
        assert!(q.accounting(&open).is_conserved());
        assert_eq!(advance_queue(&mut q, 9_999, &mut open).unwrap(), 0);
        assert_eq!(advance_queue(&mut q, 10_000, &mut open).unwrap(), 6);
        assert_eq!(q.dropped_count, 6);
        assert!(open.is_empty());
        let acc = q.accounting(&open);
        assert!(acc.is_conserved());
        assert_eq!((acc.solved, acc.dropped), (4, 6));
    }

    #[test]
    fn solve_at_close_counts_as_solved() {
        let w = &build_windows(&posts(1), 10, 10.0)[0];
        let mut q = DropQueue::new();
        q.ingest(w, 10_000);
        let mut open = Vec::new();
        advance_queue(&mut q, 10_000 - 1, &mut open).unwrap();
        // the annotation lands at t = close, processed before the close
        assert!(q.take_front().is_some());
        advance_queue(&mut q, 10_000, &mut open).unwrap();
        assert_eq!((q.solved_count, q.dropped_count), (1, 0));
    }

    #[test]
    fn empty_queue_advance_is_noop() {
        let mut q = DropQueue::new();
        let mut open = Vec::new();
        assert_eq!(advance_queue(&mut q, 5, &mut open).unwrap(), 0);
        assert_eq!(q.dropped_count, 0);
        assert!(matches!(
            advance_queue(&mut q, 4, &mut open),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn requeue_keeps_arrival_order() {
        let w = &build_windows(&posts(6), 6, 10.0)[0];
        let mut q = DropQueue::new();
        q.ingest(w, 10_000);
        let alloc = allocate_round_robin(w, &workers(1), 3);
        let mut open = q.dispatch(&alloc).unwrap();
        let bin = open.remove(0);
        q.requeue(bin.unsolved, bin.closes_at_ms);
        let order: Vec<u64> = q.pending().map(|p| p.arrival_index).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn majority_merge() {
        let labels = [
            (PostId(1), 2),
            (PostId(1), 2),
            (PostId(1), 3),
            (PostId(2), 1),
            (PostId(2), 0),
        ];
        let merged = merge_majority(&labels);
        assert_eq!(merged[&PostId(1)], 2);
        assert_eq!(merged[&PostId(2)], 0);
    }
}
