//! Maximum-likelihood fits of worker behaviour.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contest::WorkerId;
use crate::error::{Error, Result};
use crate::inference::features::FEATURE_DIM;
use crate::inference::likelihood::{
    negative_log_likelihood, nll_gradient, observations, Observation, RateParams,
};
use crate::sim::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoState,
    LogLinear,
}

/// A fitted worker. A two-state rate is `None` when the worker never
/// produced an event in that state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBehavior {
    pub worker_id: WorkerId,
    pub model_kind: ModelKind,
    pub lambda_in_hat: Option<f64>,
    pub lambda_out_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat: Option<Vec<f64>>,
    #[serde(rename = "nll")]
    pub nll_at_optimum: f64,
    #[serde(rename = "n_in")]
    pub n_events_in: u64,
    #[serde(rename = "n_out")]
    pub n_events_out: u64,
    pub converged: bool,
    #[serde(default)]
    pub iterations: u64,
}

/// Sufficient statistics of the two-state model for one state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateExposure {
    pub events: u64,
    pub exposure_s: f64,
}

impl StateExposure {
    fn add(&mut self, o: &Observation) {
        if !o.censored {
            self.events += 1;
        }
        self.exposure_s += o.tau_s;
    }

    /// `events / exposure`, or `None` without events.
    pub fn rate(&self) -> Result<Option<f64>> {
        if self.events == 0 {
            return Ok(None);
        }
        if !(self.exposure_s > 0.0) {
            return Err(Error::DegenerateData(format!(
                "{} events with zero total holding time",
                self.events
            )));
        }
        Ok(Some(self.events as f64 / self.exposure_s))
    }

    /// Log loss at the maximum-likelihood rate.
    fn nll_at_rate(&self, rate: Option<f64>) -> f64 {
        match rate {
            Some(r) => self.events as f64 * (1.0 - r.ln()),
            None => 0.0,
        }
    }
}

/// Split observations by eligibility.
pub fn exposures(obs: &[Observation]) -> (StateExposure, StateExposure) {
    let mut inside = StateExposure::default();
    let mut outside = StateExposure::default();
    for o in obs {
        if o.eligible {
            inside.add(o)
        } else {
            outside.add(o)
        }
    }
    (inside, outside)
}

/// Closed-form fit of the two-state model: per state, events over total
/// time spent in that state.
pub fn fit_two_state(worker_id: WorkerId, obs: &[Observation]) -> Result<FittedBehavior> {
    let (inside, outside) = exposures(obs);
    fit_from_exposures(worker_id, inside, outside)
}

pub fn fit_from_exposures(
    worker_id: WorkerId,
    inside: StateExposure,
    outside: StateExposure,
) -> Result<FittedBehavior> {
    let lambda_in = inside.rate()?;
    let lambda_out = outside.rate()?;
    Ok(FittedBehavior {
        worker_id,
        model_kind: ModelKind::TwoState,
        lambda_in_hat: lambda_in,
        lambda_out_hat: lambda_out,
        theta_hat: None,
        nll_at_optimum: inside.nll_at_rate(lambda_in) + outside.nll_at_rate(lambda_out),
        n_events_in: inside.events,
        n_events_out: outside.events,
        converged: true,
        iterations: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub init_theta: Vec<f64>,
    /// Length of the first trial step along the normalised gradient.
    pub step_size: f64,
    pub max_iters: u64,
    /// Stop once the gradient's largest component falls below this.
    pub tolerance: f64,
    /// Coefficients to fit; the others stay at their initial value.
    pub active: [bool; FEATURE_DIM],
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            init_theta: vec![0.0; FEATURE_DIM],
            step_size: 1.0,
            max_iters: 10_000,
            tolerance: 1e-8,
            active: [true; FEATURE_DIM],
        }
    }
}

impl FitOptions {
    /// Intercept and eligibility only: the log-linear form of the two-state
    /// model.
    pub fn eligibility_only() -> Self {
        FitOptions {
            active: [true, false, false, false, true],
            ..Self::default()
        }
    }
}

/// A log-linear fit together with the log loss after every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub fit: FittedBehavior,
    pub nll_path: Vec<f64>,
}

pub fn fit_log_linear(
    worker_id: WorkerId,
    obs: &[Observation],
    options: &FitOptions,
) -> Result<FittedBehavior> {
    Ok(fit_log_linear_traced(worker_id, obs, options)?.fit)
}

/// Gradient descent with Barzilai-Borwein step lengths and a backtracking
/// line search.
///
/// A trial step is accepted when it satisfies the Armijo condition or when
/// the directional derivative at the trial point is still non-positive. The
/// log loss is convex in theta, so the second rule also guarantees descent
/// and keeps the search working once loss differences drop below rounding.
pub fn fit_log_linear_traced(
    worker_id: WorkerId,
    obs: &[Observation],
    options: &FitOptions,
) -> Result<DescentTrace> {
    if options.init_theta.len() != FEATURE_DIM {
        return Err(Error::Contract(format!(
            "init_theta has {} entries, expected {FEATURE_DIM}",
            options.init_theta.len()
        )));
    }
    if options.max_iters == 0 || !(options.step_size > 0.0) || !(options.tolerance > 0.0) {
        return Err(Error::Config(
            "max_iters, step_size and tolerance must be positive".into(),
        ));
    }
    let active = options.active;
    let loss = |theta: &[f64]| {
        negative_log_likelihood(
            obs,
            &RateParams::LogLinear {
                theta: theta.to_vec(),
            },
        )
    };
    let grad = |theta: &[f64]| -> Result<Vec<f64>> {
        let mut g = nll_gradient(obs, theta)?;
        for (gd, on) in g.iter_mut().zip(active) {
            if !on {
                *gd = 0.0;
            }
        }
        Ok(g)
    };
    let fail = |message: String, theta: &[f64]| Error::Optimization {
        message,
        last_theta: theta.to_vec(),
    };

    let mut theta = options.init_theta.clone();
    let mut f = match loss(&theta) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => return Err(fail(format!("initial log loss is {v}"), &theta)),
        Err(e) => return Err(fail(format!("initial log loss: {e}"), &theta)),
    };
    let mut g = grad(&theta)?;
    let mut path = vec![f];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step = options.step_size / inf_norm(&g).max(1.0);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        if !g.iter().all(|v| v.is_finite()) {
            return Err(fail("gradient is not finite".into(), &theta));
        }
        if inf_norm(&g) < options.tolerance {
            converged = true;
            break;
        }
        if let Some((theta_prev, g_prev)) = &prev {
            let s: Vec<f64> = theta.iter().zip(theta_prev).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 && sy.is_finite() {
                step = dot(&s, &s) / sy;
            } else {
                step *= 2.0;
            }
        }
        let gg = dot(&g, &g);
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..200 {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, gd)| t - alpha * gd).collect();
            if let Ok(f_trial) = loss(&trial) {
                if f_trial.is_finite() {
                    let armijo = f_trial <= f - 1e-4 * alpha * gg;
                    let g_trial = grad(&trial)?;
                    let still_descending =
                        g_trial.iter().all(|v| v.is_finite()) && dot(&g_trial, &g) >= 0.0;
                    if armijo || (still_descending && f_trial <= f + 1e-12 * f.abs().max(1.0)) {
                        accepted = Some((trial, f_trial, g_trial));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            // No representable step improves on theta.
            break;
        };
        iterations += 1;
        prev = Some((
            std::mem::replace(&mut theta, next),
            std::mem::replace(&mut g, g_next),
        ));
        f = f_next;
        path.push(f_next);
    }
    if !converged && inf_norm(&g) < options.tolerance {
        converged = true;
    }

    let (inside, outside) = exposures(obs);
    Ok(DescentTrace {
        fit: FittedBehavior {
            worker_id,
            model_kind: ModelKind::LogLinear,
            lambda_in_hat: None,
            lambda_out_hat: None,
            theta_hat: Some(theta),
            nll_at_optimum: *path.last().expect("path starts with the initial loss"),
            n_events_in: inside.events,
            n_events_out: outside.events,
            converged,
            iterations,
        },
        nll_path: path,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fit every worker of a log, in worker order.
pub fn fit_log(
    log: &EventLog,
    kind: ModelKind,
    options: &FitOptions,
) -> Result<Vec<FittedBehavior>> {
    log.worker_ids()
        .into_par_iter()
        .map(|w| {
            let obs = observations(log, w);
            match kind {
                ModelKind::TwoState => fit_two_state(w, &obs),
                ModelKind::LogLinear => fit_log_linear(w, &obs, options),
            }
        })
        .collect()
}

pub fn write_fitted_jsonl<W: Write>(fits: &[FittedBehavior], mut out: W) -> Result<()> {
    for f in fits {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_fitted_jsonl<R: BufRead>(input: R) -> Result<Vec<FittedBehavior>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Input(format!("fitted line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::sampling::{holding_time, substream};

    fn synthetic(rate_in: f64, rate_out: f64, n: usize, seed: u64) -> Vec<Observation> {
        let mut rng = substream(seed, 0);
        (0..n)
            .map(|j| {
                let eligible = j % 2 == 0;
                let r = if eligible { rate_in } else { rate_out };
                Observation::event(holding_time(r, 1.0, &mut rng).unwrap() / 1000.0, eligible)
            })
            .collect()
    }

    #[test]
    fn ten_events_over_five_units() {
        let obs: Vec<Observation> = (0..10).map(|_| Observation::event(0.5, true)).collect();
        let fit = fit_two_state(WorkerId(0), &obs).unwrap();
        assert_eq!(fit.lambda_in_hat, Some(2.0));
        assert_eq!(fit.lambda_out_hat, None);
        assert_eq!((fit.n_events_in, fit.n_events_out), (10, 0));
    }

    #[test]
    fn zero_holding_time_is_degenerate() {
        let obs = [Observation::event(0.0, true)];
        assert!(matches!(
            fit_two_state(WorkerId(0), &obs),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn censored_exposure_enters_the_denominator() {
        let mut obs = vec![
            Observation::event(1.0, false),
            Observation::event(1.0, false),
        ];
        obs.push(Observation {
            censored: true,
            ..Observation::event(2.0, false)
        });
        let fit = fit_two_state(WorkerId(0), &obs).unwrap();
        assert_eq!(fit.lambda_out_hat, Some(0.5));
        assert_eq!(fit.n_events_out, 2);
    }

    #[test]
    fn closed_form_nll_matches_direct_evaluation() {
        let obs = synthetic(1.66, 1.12, 200, 1);
        let fit = fit_two_state(WorkerId(0), &obs).unwrap();
        let direct = negative_log_likelihood(
            &obs,
            &RateParams::TwoState {
                lambda_in: fit.lambda_in_hat.unwrap(),
                lambda_out: fit.lambda_out_hat.unwrap(),
            },
        )
        .unwrap();
        assert!((fit.nll_at_optimum - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn eligibility_only_log_linear_matches_two_state() {
        let obs = synthetic(1.66, 1.12, 2000, 2);
        let two = fit_two_state(WorkerId(0), &obs).unwrap();
        let ll = fit_log_linear(WorkerId(0), &obs, &FitOptions::eligibility_only()).unwrap();
        assert!(ll.converged);
        let theta = ll.theta_hat.unwrap();
        let out = theta[0].exp();
        let inside = (theta[0] + theta[4]).exp();
        assert!((out / two.lambda_out_hat.unwrap() - 1.0).abs() < 1e-6);
        assert!((inside / two.lambda_in_hat.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn warm_start_at_optimum_stops_immediately() {
        let obs = synthetic(1.3, 0.9, 500, 3);
        let first = fit_log_linear(WorkerId(0), &obs, &FitOptions::eligibility_only()).unwrap();
        let warm = FitOptions {
            init_theta: first.theta_hat.clone().unwrap(),
            ..FitOptions::eligibility_only()
        };
        let again = fit_log_linear(WorkerId(0), &obs, &warm).unwrap();
        assert!(again.converged);
        assert!(again.iterations <= 2);
    }

    #[test]
    fn descent_is_monotone() {
        let mut obs = synthetic(1.4, 1.0, 400, 4);
        for (j, o) in obs.iter_mut().enumerate() {
            o.x[1] = (j % 7) as f64 / 7.0;
            o.x[2] = j as f64 / 400.0;
            o.x[3] = 1.0 - j as f64 / 400.0;
        }
        let trace = fit_log_linear_traced(WorkerId(0), &obs, &FitOptions::default()).unwrap();
        for w in trace.nll_path.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn non_finite_start_reports_the_iterate() {
        let obs = synthetic(1.0, 1.0, 10, 5);
        let opts = FitOptions {
            init_theta: vec![800.0, 0.0, 0.0, 0.0, 0.0],
            ..FitOptions::default()
        };
        match fit_log_linear(WorkerId(0), &obs, &opts) {
            Err(Error::Optimization { last_theta, .. }) => assert_eq!(last_theta[0], 800.0),
            other => panic!("expected optimisation failure, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let obs = synthetic(1.66, 1.12, 50, 6);
        let fits = vec![
            fit_two_state(WorkerId(0), &obs).unwrap(),
            fit_log_linear(WorkerId(1), &obs, &FitOptions::default()).unwrap(),
        ];
        let mut buf = Vec::new();
        write_fitted_jsonl(&fits, &mut buf).unwrap();
        assert_eq!(read_fitted_jsonl(buf.as_slice()).unwrap(), fits);
        let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap();
        for key in [
            "worker_id",
            "model_kind",
            "lambda_in_hat",
            "nll",
            "n_in",
            "n_out",
            "converged",
        ] {
            assert!(first.contains(&format!("\"{key}\"")), "{key}");
        }
    }
}
