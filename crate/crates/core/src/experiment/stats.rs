//! Summary statistics for sweep results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); NaN below two samples.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    /// `+inf` when every group is constant but the means differ; NaN when
    /// every sample is equal.
    pub f: f64,
    pub df_between: u64,
    pub df_within: u64,
    /// Set when the within-group variance is zero.
    pub degenerate: bool,
}

/// One-way analysis of variance across `groups`.
pub fn anova_f(groups: &[Vec<f64>]) -> Result<Anova> {
    if groups.len() < 2 {
        return Err(Error::Input(format!(
            "ANOVA needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::Input(format!(
            "every ANOVA group needs 2 samples, one has {}",
            g.len()
        )));
    }
    if groups.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Input("ANOVA samples must be finite".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_between = (groups.len() - 1) as u64;
    let df_within = (n - groups.len()) as u64;
    let msb = ss_between / df_between as f64;
    let msw = ss_within / df_within as f64;
    let (f, degenerate) = if ss_within == 0.0 {
        (
            if ss_between == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            },
            true,
        )
    } else {
        (msb / msw, false)
    };
    Ok(Anova {
        f,
        df_between,
        df_within,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where the second value is larger.
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// Exact one-sided p-value of `wins` or more under a fair coin, ties
    /// dropped. One when every pair is tied.
    pub p_value: f64,
}

/// One-sided sign test that the second member of each pair tends to be
/// larger.
pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let wins = pairs.iter().filter(|(a, b)| b > a).count() as u64;
    let losses = pairs.iter().filter(|(a, b)| b < a).count() as u64;
    let ties = pairs.len() as u64 - wins - losses;
    SignTest {
        wins,
        losses,
        ties,
        p_value: binomial_upper_tail(wins + losses, wins),
    }
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // log C(n, i) - n log 2, accumulated upward from i = k
    let ln2 = std::f64::consts::LN_2;
    let mut log_c = ln_choose(n, k);
    let mut total = 0.0;
    for i in k..=n {
        total += (log_c - n as f64 * ln2).exp();
        log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    total.min(1.0)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test of `samples` against the exponential
/// law with the given rate, using the asymptotic Kolmogorov distribution.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsTest> {
    if samples.is_empty() {
        return Err(Error::Input("KS test needs samples".into()));
    }
    if !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "exponential rate must be positive, got {rate}"
        )));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_survival(t),
    })
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powi(j as i32 - 1) * (-2.0 * j * j * t * t).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
