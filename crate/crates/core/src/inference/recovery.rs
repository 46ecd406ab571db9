//! Simulate-then-fit: draw worker behaviour from a prior, race the workers
//! in small capped contests, fit the two-state model on the pooled logs and
//! compare the estimates with the truth.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contest::{ContestConfig, WorkerId, WorkerProfile};
use crate::error::Result;
use crate::experiment::corpus::generate_corpus;
use crate::inference::fit::{exposures, fit_from_exposures, FittedBehavior, StateExposure};
use crate::inference::likelihood::observations;
use crate::sim::sampling::{
    draw_behavior, mix_seed, substream, worker_stream, BehaviorPrior, Purpose,
};
use crate::sim::{run_contest_with, SimOptions};

/// Mean entity count of the synthetic posts used by recovery races.
const RACE_MEAN_ENTITIES: f64 = 1.2;

/// The race of the annotation-rate figures: a 100-annotation cap over a
/// single 100-post window that stays on screen for 200 seconds.
pub fn race_config(n_workers: u32) -> ContestConfig {
    ContestConfig {
        n_workers,
        n_posts: 100,
        window_size: 100,
        task_unit_time_s: 200.0,
        task_unit_size: 20,
        arrival_rate: 0.05 * f64::from(n_workers),
        reward_spread: (n_workers / 2).max(1),
        ..ContestConfig::field_defaults()
    }
}

pub fn race_options() -> SimOptions {
    SimOptions {
        annotation_cap: Some(100),
        ..SimOptions::without_exits()
    }
}

/// Draw `n_workers` profiles: skill uniform on `[0, 1]`, rates from `prior`.
pub fn draw_profiles(
    prior: &BehaviorPrior,
    n_workers: u32,
    seed: u64,
) -> Result<Vec<WorkerProfile>> {
    (0..n_workers)
        .map(|i| {
            let mut rng = worker_stream(seed, i as usize, Purpose::Behaviour);
            let skill = rng.random::<f64>();
            let (lambda_in, lambda_out) = draw_behavior(prior, &mut rng)?;
            Ok(WorkerProfile::new(i, skill, lambda_in, lambda_out))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledFit {
    pub fits: Vec<FittedBehavior>,
    pub runs: u64,
    /// Whether every required worker reached the event target in both
    /// states before the run budget ran out.
    pub reached_target: bool,
}

/// Run independent races under `seed` and pool each worker's exposure until
/// every worker listed in `required` has at least `min_events` events in
/// both states, or `max_runs` races were run.
pub fn pooled_two_state_fit(
    config: &ContestConfig,
    options: &SimOptions,
    profiles: &[WorkerProfile],
    required: &[usize],
    min_events: u64,
    seed: u64,
    max_runs: u64,
) -> Result<PooledFit> {
    let mut pooled = vec![(StateExposure::default(), StateExposure::default()); profiles.len()];
    let done = |pooled: &[(StateExposure, StateExposure)]| {
        required
            .iter()
            .all(|&i| pooled[i].0.events >= min_events && pooled[i].1.events >= min_events)
    };
    let mut runs = 0;
    while !done(&pooled) && runs < max_runs {
        let run_seed = mix_seed(seed, runs);
        let posts = generate_corpus(
            config.n_posts,
            &mut substream(run_seed, 1),
            RACE_MEAN_ENTITIES,
        )?;
        let log = run_contest_with(config, profiles, &posts, run_seed, options)?;
        log.verify()?;
        for (i, p) in profiles.iter().enumerate() {
            let (a, b) = exposures(&observations(&log, p.id));
            pooled[i].0.events += a.events;
            pooled[i].0.exposure_s += a.exposure_s;
            pooled[i].1.events += b.events;
            pooled[i].1.exposure_s += b.exposure_s;
        }
        runs += 1;
    }
    let fits = profiles
        .iter()
        .zip(&pooled)
        .map(|(p, &(a, b))| fit_from_exposures(p.id, a, b))
        .collect::<Result<_>>()?;
    Ok(PooledFit {
        reached_target: done(&pooled),
        fits,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecovery {
    pub worker_id: WorkerId,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub fit: FittedBehavior,
    pub rel_err_in: Option<f64>,
    pub rel_err_out: Option<f64>,
}

impl WorkerRecovery {
    pub fn new(profile: &WorkerProfile, fit: FittedBehavior) -> Self {
        let rel = |hat: Option<f64>, truth: f64| hat.map(|h| (h - truth).abs() / truth);
        WorkerRecovery {
            worker_id: profile.id,
            lambda_in: profile.lambda_in,
            lambda_out: profile.lambda_out,
            rel_err_in: rel(fit.lambda_in_hat, profile.lambda_in),
            rel_err_out: rel(fit.lambda_out_hat, profile.lambda_out),
            fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecovery {
    pub seed: u64,
    pub runs: u64,
    pub reached_target: bool,
    pub workers: Vec<WorkerRecovery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n_workers: u32,
    pub n_events_target: u64,
    pub seeds: Vec<SeedRecovery>,
    pub mean_rel_err_in: Option<f64>,
    pub mean_rel_err_out: Option<f64>,
    pub max_rel_err_in: Option<f64>,
    pub max_rel_err_out: Option<f64>,
    /// Rates (over all seeds and workers) that had no events to fit.
    pub unidentifiable: u64,
}

impl RecoveryReport {
    pub fn from_seeds(n_workers: u32, n_events_target: u64, seeds: Vec<SeedRecovery>) -> Self {
        let errs = |pick: fn(&WorkerRecovery) -> Option<f64>| -> Vec<f64> {
            seeds
                .iter()
                .flat_map(|s| s.workers.iter().filter_map(pick))
                .collect()
        };
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let max = |v: &[f64]| v.iter().copied().reduce(f64::max);
        let e_in = errs(|w| w.rel_err_in);
        let e_out = errs(|w| w.rel_err_out);
        let total_rates = 2 * seeds.iter().map(|s| s.workers.len() as u64).sum::<u64>();
        RecoveryReport {
            n_workers,
            n_events_target,
            mean_rel_err_in: mean(&e_in),
            mean_rel_err_out: mean(&e_out),
            max_rel_err_in: max(&e_in),
            max_rel_err_out: max(&e_out),
            unidentifiable: total_rates - e_in.len() as u64 - e_out.len() as u64,
            seeds,
        }
    }
}

/// Run budget for one seed: generous enough that a worker who is eligible
/// a tenth of the time still reaches the target.
fn run_budget(n_workers: u32, n_events_target: u64) -> u64 {
    let per_run = (100 / u64::from(n_workers.max(1))).max(1);
    20 * n_events_target.div_ceil(per_run) + 10
}

/// Recover the rates of the given profiles under one seed, racing until
/// every worker has `n_events_target` events in each state.
pub fn recover_profiles(
    profiles: &[WorkerProfile],
    n_events_target: u64,
    seed: u64,
) -> Result<SeedRecovery> {
    let n = profiles.len() as u32;
    let all: Vec<usize> = (0..profiles.len()).collect();
    recover_with(
        profiles,
        &all,
        n_events_target,
        seed,
        run_budget(n, n_events_target),
    )
}

/// As [`recover_profiles`], stopping once the workers in `required` reach
/// the target.
pub fn recover_with(
    profiles: &[WorkerProfile],
    required: &[usize],
    n_events_target: u64,
    seed: u64,
    max_runs: u64,
) -> Result<SeedRecovery> {
    let config = race_config(profiles.len() as u32);
    let pooled = pooled_two_state_fit(
        &config,
        &race_options(),
        profiles,
        required,
        n_events_target,
        seed,
        max_runs,
    )?;
    Ok(SeedRecovery {
        seed,
        runs: pooled.runs,
        reached_target: pooled.reached_target,
        workers: profiles
            .iter()
            .zip(pooled.fits)
            .map(|(p, f)| WorkerRecovery::new(p, f))
            .collect(),
    })
}

/// For every seed, draw fresh profiles from `prior`, race and fit.
pub fn recovery_experiment(
    prior: &BehaviorPrior,
    n_workers: u32,
    n_events_target: u64,
    seeds: &[u64],
) -> Result<RecoveryReport> {
    prior.validate()?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let profiles = draw_profiles(prior, n_workers, seed)?;
            recover_profiles(&profiles, n_events_target, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveryReport::from_seeds(
        n_workers,
        n_events_target,
        per_seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn race_config_is_valid() {
        for n in 1..=20 {
            race_config(n).validate().unwrap();
        }
        assert_eq!(race_config(5).duration_ms(), 200_000);
    }

    #[test]
    fn zero_target_flags_everything() {
        let report = recovery_experiment(&BehaviorPrior::default(), 5, 0, &[1, 2]).unwrap();
        assert_eq!(report.unidentifiable, 20);
        assert_eq!(report.mean_rel_err_in, None);
        assert!(report.seeds.iter().all(|s| s.runs == 0));
    }

    #[test]
    fn small_recovery_reaches_its_target() {
        let report = recovery_experiment(&BehaviorPrior::default(), 3, 50, &[7]).unwrap();
        let seed = &report.seeds[0];
        assert!(seed.reached_target);
        for w in &seed.workers {
            assert!(w.fit.n_events_in >= 50 && w.fit.n_events_out >= 50);
        }
        assert_eq!(report.unidentifiable, 0);
        assert!(report.mean_rel_err_in.unwrap() < 0.5);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = recovery_experiment(&BehaviorPrior::default(), 3, 20, &[3, 4]).unwrap();
        let b = recovery_experiment(&BehaviorPrior::default(), 3, 20, &[3, 4]).unwrap();
        assert_eq!(a, b);
    }
}
