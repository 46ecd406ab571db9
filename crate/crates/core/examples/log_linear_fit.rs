//! Fit the log-linear rate model (rank, elapsed time, annotations left,
//! eligibility) to pooled race logs and compare its eligibility-only
//! special case with the closed-form two-state fit.
//!
//! ```text
//! cargo run --release --example log_linear_fit
//! ```

use crowd_contest::contest::{WorkerId, WorkerProfile};
use crowd_contest::experiment::generate_corpus;
use crowd_contest::inference::recovery::{race_config, race_options};
use crowd_contest::inference::{
    fit_log_linear_traced, fit_two_state, observations, FitOptions, FEATURE_NAMES,
};
use crowd_contest::sim::run_contest_with;
use crowd_contest::sim::sampling::substream;

fn main() -> crowd_contest::Result<()> {
    let config = race_config(5);
    let profiles: Vec<WorkerProfile> =
        [(1.66, 1.12), (1.1, 1.5), (1.3, 1.3), (0.9, 1.0), (1.2, 0.8)]
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| WorkerProfile::new(i as u32, 0.6, a, b))
            .collect();
    let worker = WorkerId(0);
    let mut obs = Vec::new();
    for seed in 0..200 {
        let posts = generate_corpus(config.n_posts, &mut substream(seed, 1), 1.2)?;
        let log = run_contest_with(&config, &profiles, &posts, seed, &race_options())?;
        obs.extend(observations(&log, worker));
    }
    println!("{} intervals for {worker}", obs.len());

    let two = fit_two_state(worker, &obs)?;
    println!(
        "two-state: lambda_in {:.4}, lambda_out {:.4}, nll {:.3}",
        two.lambda_in_hat.unwrap_or(f64::NAN),
        two.lambda_out_hat.unwrap_or(f64::NAN),
        two.nll_at_optimum
    );

    let restricted = fit_log_linear_traced(worker, &obs, &FitOptions::eligibility_only())?;
    let theta = restricted.fit.theta_hat.clone().unwrap_or_default();
    println!(
        "eligibility only: exp(t0 + t4) {:.4}, exp(t0) {:.4}, nll {:.3}, {} iterations",
        (theta[0] + theta[4]).exp(),
        theta[0].exp(),
        restricted.fit.nll_at_optimum,
        restricted.fit.iterations
    );

    let full = fit_log_linear_traced(worker, &obs, &FitOptions::default())?;
    println!(
        "\nall features ({} iterations, converged: {}):",
        full.fit.iterations, full.fit.converged
    );
    for (name, t) in FEATURE_NAMES
        .iter()
        .zip(full.fit.theta_hat.iter().flatten())
    {
        println!("  {name:>10} {t:>9.4}");
    }
    let path = &full.nll_path;
    println!(
        "log loss {:.3} -> {:.3}",
        path.first().copied().unwrap_or(f64::NAN),
        full.fit.nll_at_optimum
    );
    Ok(())
}
