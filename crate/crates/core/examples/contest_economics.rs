//! Quality, utility, scoring and the leaderboard on a hand-made contest.
//!
//! ```text
//! cargo run --example contest_economics
//! ```

use std::collections::BTreeMap;

use crowd_contest::contest::{
    compute_quality, is_eligible, k_neighbours_view, rank_workers, score_annotation,
    worker_utility, Tally, WorkerId, WorkerProfile,
};

fn main() -> crowd_contest::Result<()> {
    let base_points = 10;
    let spread = 2;
    let prize = 0.10;
    // (worker, skill, cost per effort, submissions as (annotated, expected))
    let workers = [
        (0, 0.9, 0.001, vec![(2, 2), (1, 1), (0, 1), (3, 3)]),
        (1, 0.4, 0.002, vec![(1, 2), (2, 2), (1, 0), (2, 1), (1, 1)]),
        (2, 0.7, 0.001, vec![(1, 1), (2, 2)]),
        (3, 0.2, 0.004, vec![(4, 1)]),
    ];
    let mut tallies = BTreeMap::new();
    let mut stamps = BTreeMap::new();
    for (i, (id, skill, _, subs)) in workers.iter().enumerate() {
        let score: u64 = subs
            .iter()
            .map(|&(a, e)| score_annotation(a, e, base_points))
            .sum();
        let effort = subs.len() as f64;
        println!(
            "worker {id}: {} submissions, score {score}, quality at delta 0.1 = {:.2}",
            subs.len(),
            compute_quality(*skill, effort, 0.1)
        );
        tallies.insert(
            WorkerId(*id),
            Tally {
                score: score as f64,
                annotations: subs.len() as u64,
            },
        );
        stamps.insert(WorkerId(*id), 1000 * i as u64);
    }

    let ranking = rank_workers(&tallies, &stamps)?;
    println!("\nleaderboard (top {spread} paid {prize}):");
    for (r, e) in ranking.entries.iter().enumerate() {
        let (_, skill, cost, subs) = &workers[e.worker_id.0 as usize];
        let profile = WorkerProfile {
            cost_per_effort: *cost,
            ..WorkerProfile::new(e.worker_id.0, *skill, 1.0, 1.0)
        };
        let won = is_eligible(r + 1, spread);
        let u = worker_utility(prize, won, subs.len() as f64, profile.cost_per_effort);
        println!(
            "  {}. {} score {:>3} paid {:<5} utility {u:+.3}",
            r + 1,
            e.worker_id,
            e.score,
            won
        );
    }

    println!("\nwhat {} sees with k = 1:", WorkerId(1));
    for (rank, e) in k_neighbours_view(&ranking, WorkerId(1), 1)? {
        println!("  {rank}. {} {}", e.worker_id, e.score);
    }
    Ok(())
}
