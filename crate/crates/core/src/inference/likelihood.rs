//! The exponential log loss of a worker's holding times.
//!
//! Each observed interval contributes `-log r + r * tau`; an interval cut
//! short by the contest end or an exit contributes only `r * tau`. Times are
//! in seconds.

use serde::{Deserialize, Serialize};

use crate::contest::WorkerId;
use crate::error::{Error, Result};
use crate::inference::features::{dot, FeatureScaling, FeatureVector, FEATURE_DIM};
use crate::sim::EventLog;

/// One holding interval as the likelihood sees it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub tau_s: f64,
    pub eligible: bool,
    pub x: [f64; FEATURE_DIM],
    /// True when the interval ended without an event.
    pub censored: bool,
}

impl Observation {
    pub fn event(tau_s: f64, eligible: bool) -> Self {
        Observation {
            tau_s,
            eligible,
            x: [1.0, 0.0, 0.0, 0.0, if eligible { 1.0 } else { 0.0 }],
            censored: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateParams {
    TwoState { lambda_in: f64, lambda_out: f64 },
    LogLinear { theta: Vec<f64> },
}

impl RateParams {
    fn rate(&self, obs: &Observation) -> Result<f64> {
        let r = match self {
            RateParams::TwoState {
                lambda_in,
                lambda_out,
            } => {
                if obs.eligible {
                    *lambda_in
                } else {
                    *lambda_out
                }
            }
            RateParams::LogLinear { theta } => {
                if theta.len() != FEATURE_DIM {
                    return Err(Error::Contract(format!(
                        "theta has {} entries, expected {FEATURE_DIM}",
                        theta.len()
                    )));
                }
                dot(theta, &obs.x).exp()
            }
        };
        if r > 0.0 && r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Domain(format!(
                "rate {r} is not positive and finite"
            )))
        }
    }
}

/// Observations of one worker, in event order, with any censored tail last.
pub fn observations(log: &EventLog, worker: WorkerId) -> Vec<Observation> {
    let scaling = FeatureScaling {
        n_workers: log.config.n_workers,
        contest_ms: log.contest_ms,
        annotation_budget: log.annotation_budget,
    };
    let mut out: Vec<Observation> = log
        .events
        .iter()
        .filter(|e| e.worker_id == worker)
        .map(|e| Observation {
            tau_s: e.holding_time_ms as f64 / 1000.0,
            eligible: e.eligible_at_event,
            x: FeatureVector::from_event(e).design(&scaling),
            censored: false,
        })
        .collect();
    for c in log.censored.iter().filter(|c| c.worker_id == worker) {
        let features = FeatureVector {
            rank: c.rank,
            elapsed_time_ms: c.start_ms,
            annotations_remaining: c.annotations_remaining,
            eligible: c.eligible,
        };
        out.push(Observation {
            tau_s: (c.end_ms - c.start_ms) as f64 / 1000.0,
            eligible: c.eligible,
            x: features.design(&scaling),
            censored: true,
        });
    }
    out
}

pub fn negative_log_likelihood(obs: &[Observation], params: &RateParams) -> Result<f64> {
    let mut total = 0.0;
    for o in obs {
        if !o.censored && o.tau_s <= 0.0 {
            return Err(Error::Domain("holding time must be positive".into()));
        }
        let r = params.rate(o)?;
        total += r * o.tau_s;
        if !o.censored {
            total -= r.ln();
        }
    }
    Ok(total)
}

/// Gradient of the log-linear log loss: `sum_j (r_j tau_j - [event]) x_j`.
pub fn nll_gradient(obs: &[Observation], theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != FEATURE_DIM {
        return Err(Error::Contract(format!(
            "theta has {} entries, expected {FEATURE_DIM}",
            theta.len()
        )));
    }
    let mut g = vec![0.0; FEATURE_DIM];
    for o in obs {
        let r = dot(theta, &o.x).exp();
        let w = r * o.tau_s - if o.censored { 0.0 } else { 1.0 };
        for (gd, xd) in g.iter_mut().zip(&o.x) {
            *gd += w * xd;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::sim::sampling::substream;

    fn two(lambda_in: f64, lambda_out: f64) -> RateParams {
        RateParams::TwoState {
            lambda_in,
            lambda_out,
        }
    }

    fn random_obs(rng: &mut impl Rng, n: usize) -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let eligible = rng.random::<bool>();
                Observation {
                    tau_s: rng.random_range(0.01..3.0),
                    eligible,
                    x: [
                        1.0,
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                        if eligible { 1.0 } else { 0.0 },
                    ],
                    censored: rng.random::<f64>() < 0.1,
                }
            })
            .collect()
    }

    #[test]
    fn unit_event() {
        let obs = [Observation::event(1.0, true)];
        assert_eq!(negative_log_likelihood(&obs, &two(1.0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn additive_over_events() {
        let one = [Observation::event(0.7, false)];
        let pair = [one[0], one[0]];
        let p = two(2.0, 1.3);
        let a = negative_log_likelihood(&one, &p).unwrap();
        assert_eq!(negative_log_likelihood(&pair, &p).unwrap(), 2.0 * a);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(negative_log_likelihood(&[], &two(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn matches_termwise_sum() {
        let mut rng = substream(3, 0);
        for _ in 0..50 {
            let obs = random_obs(&mut rng, 40);
            let theta: Vec<f64> = (0..FEATURE_DIM)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let mut brute = 0.0;
            for o in &obs {
                let s: f64 = theta.iter().zip(o.x.iter()).map(|(a, b)| a * b).sum();
                brute += s.exp() * o.tau_s;
                if !o.censored {
                    brute -= s;
                }
            }
            let nll = negative_log_likelihood(&obs, &RateParams::LogLinear { theta }).unwrap();
            assert!((nll - brute).abs() <= 1e-12 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_rates_and_dimensions() {
        let obs = [Observation::event(1.0, true)];
        assert!(matches!(
            negative_log_likelihood(&obs, &two(0.0, 1.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            nll_gradient(&obs, &[0.0; 3]),
            Err(Error::Contract(_))
        ));
        let zero = [Observation::event(0.0, true)];
        assert!(matches!(
            negative_log_likelihood(&zero, &two(1.0, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gradient_vanishes_at_one_event_optimum() {
        // a single event with tau = 2 is fitted by rate 1/2 on the intercept
        let obs = [Observation {
            x: [1.0, 0.0, 0.0, 0.0, 0.0],
            ..Observation::event(2.0, false)
        }];
        let theta = [(0.5f64).ln(), 0.0, 0.0, 0.0, 0.0];
        assert!(nll_gradient(&obs, &theta)
            .unwrap()
            .iter()
            .all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn intercept_only_gradient_is_scalar_sum() {
        let mut rng = substream(4, 0);
        let mut obs = random_obs(&mut rng, 30);
        for o in &mut obs {
            o.x = [1.0, 0.0, 0.0, 0.0, 0.0];
            o.censored = false;
        }
        let theta = [0.3, 0.0, 0.0, 0.0, 0.0];
        let g = nll_gradient(&obs, &theta).unwrap();
        let r = 0.3f64.exp();
        let expected: f64 = obs.iter().map(|o| r * o.tau_s - 1.0).sum();
        assert!((g[0] - expected).abs() < 1e-12);
        assert!(g[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = substream(5, 0);
        for _ in 0..100 {
            let obs = random_obs(&mut rng, 25);
            let theta: Vec<f64> = (0..FEATURE_DIM)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let g = nll_gradient(&obs, &theta).unwrap();
            let eps = 1e-5;
            for d in 0..FEATURE_DIM {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[d] += eps;
                dn[d] -= eps;
                let fd = (negative_log_likelihood(&obs, &RateParams::LogLinear { theta: up })
                    .unwrap()
                    - negative_log_likelihood(&obs, &RateParams::LogLinear { theta: dn }).unwrap())
                    / (2.0 * eps);
                let rel = (fd - g[d]).abs() / g[d].abs().max(1.0);
                assert!(rel < 1e-6, "d={d} analytic {} fd {fd}", g[d]);
            }
        }
    }

    #[test]
    fn time_rescaling_keeps_each_term() {
        let mut rng = substream(6, 0);
        let obs = random_obs(&mut rng, 20);
        let c = 1000.0;
        let scaled: Vec<Observation> = obs
            .iter()
            .map(|o| Observation {
                tau_s: o.tau_s * c,
                ..*o
            })
            .collect();
        for (o, s) in obs.iter().zip(&scaled) {
            let a = 1.7 * o.tau_s;
            let b = (1.7 / c) * s.tau_s;
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }
}
