//! Statistical oracles on whole simulated contests.

use crowd_contest::contest::{ContestConfig, WorkerId, WorkerProfile};
use crowd_contest::experiment::generate_corpus;
use crowd_contest::experiment::stats::{binomial_upper_tail, ks_exponential, sign_test};
use crowd_contest::inference::fit::{fit_log_linear, fit_two_state, FitOptions};
use crowd_contest::inference::observations;
use crowd_contest::inference::recovery::{race_config, race_options};
use crowd_contest::sim::sampling::{holding_time, substream};
use crowd_contest::sim::{run_contest_with, EventLog, SimOptions};

fn duel_config() -> ContestConfig {
    ContestConfig {
        n_workers: 2,
        n_posts: 200,
        window_size: 20,
        task_unit_time_s: 10.0,
        task_unit_size: 10,
        arrival_rate: 1.0,
        reward_spread: 1,
        ..ContestConfig::scaled_defaults()
    }
}

fn duel(profiles: &[WorkerProfile], seed: u64) -> EventLog {
    let config = duel_config();
    let posts = generate_corpus(config.n_posts, &mut substream(seed, 1), 1.2).unwrap();
    run_contest_with(
        &config,
        profiles,
        &posts,
        seed,
        &SimOptions::without_exits(),
    )
    .unwrap()
}

#[test]
fn dominant_rates_produce_more_annotations() {
    let profiles = [
        WorkerProfile::new(0, 0.6, 1.0, 0.9),
        WorkerProfile::new(1, 0.6, 1.2, 1.05),
    ];
    let pairs: Vec<(f64, f64)> = (0..500)
        .map(|seed| {
            let counts = duel(&profiles, seed).annotations_by_worker();
            (counts[&WorkerId(0)] as f64, counts[&WorkerId(1)] as f64)
        })
        .collect();
    let t = sign_test(&pairs);
    assert!(t.p_value < 0.05, "{t:?}");
}

#[test]
fn identical_workers_win_equally_often() {
    let profiles = [
        WorkerProfile::new(0, 0.7, 1.0, 1.0),
        WorkerProfile::new(1, 0.7, 1.0, 1.0),
    ];
    let n = 1000;
    let first_wins = (0..n)
        .filter(|&seed| duel(&profiles, seed).final_ranking.entries[0].worker_id == WorkerId(0))
        .count() as u64;
    // two-sided exact binomial test at the 1% level
    let tail = binomial_upper_tail(n, first_wins.max(n - first_wins));
    assert!(2.0 * tail > 0.01, "{first_wins} of {n}");
}

#[test]
fn holding_times_are_exponential() {
    let mut rng = substream(77, 0);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| holding_time(0.8, 1.5, &mut rng).unwrap())
        .collect();
    let ks = ks_exponential(&xs, 1.2 / 1000.0).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
    // the engine's own intervals at a constant rate follow the same law
    let profiles = [
        WorkerProfile::new(0, 0.5, 1.3, 1.3),
        WorkerProfile::new(1, 0.5, 1.3, 1.3),
    ];
    let taus: Vec<f64> = (0..40)
        .flat_map(|seed| {
            duel(&profiles, seed)
                .events
                .into_iter()
                .map(|e| e.holding_time_ms as f64)
        })
        .collect();
    // whole-millisecond rounding shifts the law by at most 1 ms
    let shifted: Vec<f64> = taus.iter().map(|t| t - 0.5).collect();
    let ks = ks_exponential(&shifted, 1.3 / 1000.0).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?} over {} intervals", taus.len());
}

#[test]
fn eligibility_only_fit_reproduces_two_state_rates() {
    let config = race_config(5);
    let profiles: Vec<WorkerProfile> = (0..5)
        .map(|i| WorkerProfile::new(i, 0.5, 1.0 + 0.15 * f64::from(i), 1.2 - 0.1 * f64::from(i)))
        .collect();
    let mut obs = Vec::new();
    for seed in 0..60 {
        let posts = generate_corpus(config.n_posts, &mut substream(seed, 1), 1.2).unwrap();
        let log = run_contest_with(&config, &profiles, &posts, seed, &race_options()).unwrap();
        obs.extend(observations(&log, WorkerId(2)));
    }
    let two = fit_two_state(WorkerId(2), &obs).unwrap();
    let ll = fit_log_linear(WorkerId(2), &obs, &FitOptions::eligibility_only()).unwrap();
    let theta = ll.theta_hat.unwrap();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    assert!(rel((theta[0] + theta[4]).exp(), two.lambda_in_hat.unwrap()) < 0.02);
    assert!(rel(theta[0].exp(), two.lambda_out_hat.unwrap()) < 0.02);
}
