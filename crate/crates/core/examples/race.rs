//! Five workers race until 100 annotations have been made between them. Prints each worker's rates,
//! how its time split between paid and unpaid ranks, and the final board.
//!
//! ```text
//! cargo run --release --example race -- [seed]
//! ```

use crowd_contest::experiment::generate_corpus;
use crowd_contest::experiment::output::trajectory;
use crowd_contest::inference::recovery::{draw_profiles, race_config, race_options};
use crowd_contest::sim::run_contest_with;
use crowd_contest::sim::sampling::{substream, BehaviorPrior};

fn main() -> crowd_contest::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(11);
    let config = race_config(5);
    let profiles = draw_profiles(&BehaviorPrior::default(), 5, seed)?;
    let posts = generate_corpus(config.n_posts, &mut substream(seed, 1), 1.2)?;
    let log = run_contest_with(&config, &profiles, &posts, seed, &race_options())?;
    log.verify()?;

    println!(
        "spread {} of {}, race ended at {:.1} s",
        config.reward_spread,
        config.n_workers,
        log.ended_at_ms as f64 / 1000.0
    );
    println!(
        "{:>6} {:>9} {:>10} {:>7} {:>7}",
        "worker", "lambda_in", "lambda_out", "in", "out"
    );
    for p in &log.profiles {
        let events = log.events_of(p.id);
        let inside = events.iter().filter(|e| e.eligible_at_event).count();
        println!(
            "{:>6} {:>9.3} {:>10.3} {:>7} {:>7}",
            p.id.0,
            p.lambda_in,
            p.lambda_out,
            inside,
            events.len() - inside
        );
    }

    // cumulative annotations every 2 s, one column per worker
    let points = trajectory(&log);
    println!(
        "\n{:>6} {}",
        "t (s)",
        (0..5).map(|w| format!("{w:>5}")).collect::<String>()
    );
    for tick in (0..=log.ended_at_ms / 1000 + 1).step_by(2) {
        let row: String = log
            .profiles
            .iter()
            .map(|p| {
                let n = points
                    .iter()
                    .filter(|x| x.worker_id == p.id && x.time_s <= tick as f64)
                    .map(|x| x.cumulative_annotations)
                    .max()
                    .unwrap_or(0);
                format!("{n:>5}")
            })
            .collect();
        println!("{tick:>6} {row}");
    }

    println!("\nfinal board:");
    for (rank, e) in log.final_ranking.entries.iter().enumerate() {
        println!(
            "  {}. {} score {} ({} annotations)",
            rank + 1,
            e.worker_id,
            e.score,
            e.annotations
        );
    }
    Ok(())
}
