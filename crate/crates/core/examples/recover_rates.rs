//! Plant known rates in one worker, race it against four others drawn from
//! the prior, and fit the rates back from the pooled event logs.
//!
//! ```text
//! cargo run --release --example recover_rates -- [events-per-state]
//! ```

use crowd_contest::contest::WorkerProfile;
use crowd_contest::inference::recovery::{draw_profiles, recover_with};
use crowd_contest::inference::recovery_experiment;
use crowd_contest::sim::sampling::BehaviorPrior;

fn main() -> crowd_contest::Result<()> {
    let target: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let prior = BehaviorPrior::default();

    println!("worker 0 planted at lambda_in = 1.66, lambda_out = 1.12, {target} events per state");
    for seed in 0..5 {
        let mut profiles = draw_profiles(&prior, 5, seed)?;
        profiles[0] = WorkerProfile::new(0, profiles[0].skill, 1.66, 1.12);
        let r = recover_with(&profiles, &[0], target, seed, 100_000)?;
        let w = &r.workers[0];
        println!(
            "  seed {seed}: {:>4} races, in {:.3} ({} events), out {:.3} ({} events)",
            r.runs,
            w.fit.lambda_in_hat.unwrap_or(f64::NAN),
            w.fit.n_events_in,
            w.fit.lambda_out_hat.unwrap_or(f64::NAN),
            w.fit.n_events_out
        );
    }

    let report = recovery_experiment(&prior, 5, target / 4, &[1, 2, 3, 4])?;
    println!(
        "\nall five workers drawn from the prior, {} events per state:",
        target / 4
    );
    for s in &report.seeds {
        for w in &s.workers {
            println!(
                "  seed {} {}: in {:.3} vs {:.3}, out {:.3} vs {:.3}",
                s.seed,
                w.worker_id,
                w.fit.lambda_in_hat.unwrap_or(f64::NAN),
                w.lambda_in,
                w.fit.lambda_out_hat.unwrap_or(f64::NAN),
                w.lambda_out
            );
        }
    }
    println!(
        "mean relative error: in {:.2}%, out {:.2}%",
        100.0 * report.mean_rel_err_in.unwrap_or(f64::NAN),
        100.0 * report.mean_rel_err_out.unwrap_or(f64::NAN)
    );
    Ok(())
}
