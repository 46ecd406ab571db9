//! Random variates for the worker model: gamma-distributed behaviour rates,
//! the half-normal effort bias and exponential holding times.
//!
//! All randomness flows through [`SimRng`] streams derived from one master
//! seed, one independent stream per (worker, purpose) pair, so adding a
//! worker never shifts another worker's draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type SimRng = ChaCha8Rng;

/// What a sub-stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Holding = 0,
    Annotation = 1,
    Exit = 2,
    Behaviour = 3,
}

const PURPOSES: u64 = 4;

/// SplitMix64 finaliser, used to derive child seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream number `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream reserved for one worker and one purpose.
pub fn worker_stream(seed: u64, worker_index: usize, purpose: Purpose) -> SimRng {
    // Streams below 16 are reserved for experiment-level draws.
    substream(seed, 16 + worker_index as u64 * PURPOSES + purpose as u64)
}

/// Uniform on `(0, 1]`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Marsaglia-Tsang rejection sampler for `Gamma(shape, rate)`.
///
/// Exact for every positive shape: shapes below one are sampled at
/// `shape + 1` and scaled by `U^(1/shape)`.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    shape: f64,
    scale: f64,
    d: f64,
    c: f64,
}

impl GammaSampler {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        let boosted = if shape < 1.0 { shape + 1.0 } else { shape };
        let d = boosted - 1.0 / 3.0;
        Ok(GammaSampler {
            shape,
            scale: 1.0 / rate,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = loop {
            let (z, v) = loop {
                let z: f64 = rng.sample(StandardNormal);
                let v = 1.0 + self.c * z;
                if v > 0.0 {
                    break (z, v * v * v);
                }
            };
            let u = open_unit(rng);
            let z2 = z * z;
            if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + self.d * (1.0 - v + v.ln()) {
                break self.d * v;
            }
        };
        let x = if self.shape < 1.0 {
            x * open_unit(rng).powf(1.0 / self.shape)
        } else {
            x
        };
        x * self.scale
    }
}

/// `|N(0, sigma^2)|`.
pub fn half_normal<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (sigma * z).abs()
}

/// Generative prior over a worker's two behaviour rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPrior {
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub halfnormal_sigma: f64,
}

/// Mean rate about 1.14 per second with a spread of about 0.23. The
/// concentration and `sigma` are calibrated together with the exit hazard so
/// that the reward-spread trend is visible at 50 paired replications.
impl Default for BehaviorPrior {
    fn default() -> Self {
        BehaviorPrior {
            gamma_shape: 25.0,
            gamma_rate: 22.0,
            halfnormal_sigma: 0.01,
        }
    }
}

impl BehaviorPrior {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_shape", self.gamma_shape),
            ("gamma_rate", self.gamma_rate),
            ("halfnormal_sigma", self.halfnormal_sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn gamma_mean(&self) -> f64 {
        self.gamma_shape / self.gamma_rate
    }
}

/// Draw `(lambda_in, lambda_out)`: a gamma rate while eligible for payment,
/// and an independent gamma rate plus a half-normal effort bias otherwise.
pub fn draw_behavior<R: Rng + ?Sized>(prior: &BehaviorPrior, rng: &mut R) -> Result<(f64, f64)> {
    prior.validate()?;
    let gamma = GammaSampler::new(prior.gamma_shape, prior.gamma_rate)?;
    let positive = |rng: &mut R| loop {
        let x = gamma.sample(rng);
        if x > 0.0 {
            break x;
        }
    };
    let lambda_in = positive(rng);
    let lambda_out = positive(rng) + half_normal(prior.halfnormal_sigma, rng);
    Ok((lambda_in, lambda_out))
}

/// Exponential holding time in milliseconds at `base_rate * modulation`
/// events per second, by inversion of one uniform.
pub fn holding_time<R: Rng + ?Sized>(base_rate: f64, modulation: f64, rng: &mut R) -> Result<f64> {
    let rate = base_rate * modulation;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!(
            "holding-time rate must be positive and finite, got {rate}"
        )));
    }
    Ok(-open_unit(rng).ln() / rate * 1000.0)
}

/// Round a continuous holding time up to whole milliseconds, at least one.
pub fn to_whole_ms(ms: f64) -> u64 {
    (ms.ceil() as u64).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn gamma_mean_at_nine_eighths() {
        let g = GammaSampler::new(9.0, 8.0).unwrap();
        let mut rng = substream(11, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| g.sample(&mut rng)).collect();
        let (m, v) = mean_var(&xs);
        assert!((m / 1.125 - 1.0).abs() < 0.01, "mean {m}");
        assert!((v / (9.0 / 64.0) - 1.0).abs() < 0.02, "var {v}");
    }

    #[test]
    fn gamma_small_shape_moments() {
        let g = GammaSampler::new(0.4, 2.0).unwrap();
        let mut rng = substream(12, 0);
        let xs: Vec<f64> = (0..400_000).map(|_| g.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= 0.0));
        let (m, v) = mean_var(&xs);
        assert!((m / 0.2 - 1.0).abs() < 0.02, "mean {m}");
        assert!((v / 0.1 - 1.0).abs() < 0.04, "var {v}");
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        assert!(GammaSampler::new(0.0, 1.0).is_err());
        assert!(GammaSampler::new(1.0, -1.0).is_err());
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = substream(13, 0);
        let n = 200_000;
        let m = (0..n).map(|_| half_normal(0.5, &mut rng)).sum::<f64>() / n as f64;
        let expected = 0.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((m / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn vanishing_sigma_matches_gamma_law() {
        let prior = BehaviorPrior {
            halfnormal_sigma: 1e-9,
            ..BehaviorPrior::default()
        };
        let mut rng = substream(14, 0);
        let n = 200_000;
        let (mut sin, mut sout) = (0.0, 0.0);
        for _ in 0..n {
            let (a, b) = draw_behavior(&prior, &mut rng).unwrap();
            assert!(a > 0.0 && b > 0.0);
            sin += a;
            sout += b;
        }
        assert!((sin / sout - 1.0).abs() < 0.01);
    }

    #[test]
    fn holding_time_examples() {
        let mut rng = substream(15, 0);
        let n = 1_000_000;
        let m1 = (0..n)
            .map(|_| holding_time(1.0, 1.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((m1 / 1000.0 - 1.0).abs() < 0.01, "mean {m1} ms");
        let m2 = (0..n)
            .map(|_| holding_time(2.0, 1.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((m2 / m1 - 0.5).abs() < 0.01);

        // identity modulation: the draw depends only on base_rate
        let mut a = substream(16, 0);
        let mut b = substream(16, 0);
        assert_eq!(
            holding_time(1.7, 1.0, &mut a).unwrap(),
            holding_time(1.7, 1.0, &mut b).unwrap()
        );
        assert!(matches!(
            holding_time(0.0, 1.0, &mut a),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            holding_time(1.0, -1.0, &mut a),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn worker_streams_are_independent_of_worker_count() {
        let mut a = worker_stream(7, 3, Purpose::Holding);
        let mut b = worker_stream(7, 3, Purpose::Holding);
        let mut c = worker_stream(7, 4, Purpose::Holding);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn whole_ms_rounding() {
        assert_eq!(to_whole_ms(0.0), 1);
        assert_eq!(to_whole_ms(0.2), 1);
        assert_eq!(to_whole_ms(1.0), 1);
        assert_eq!(to_whole_ms(1.0001), 2);
    }
}
