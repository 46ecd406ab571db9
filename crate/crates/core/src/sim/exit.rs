//! Worker attrition. A worker ranked outside the reward spread may quit at
//! each five-percent checkpoint of the contest; the further below the spread
//! and the later in the contest, the likelier.

use serde::{Deserialize, Serialize};

use crate::contest::WorkerProfile;
use crate::error::{Error, Result};

/// Base hazard calibrated so that at least 85% of workers remain at the 90%
/// mark for every reward spread in {1, 5, 10} of the scaled field setup
/// (about 0.86 at spread 1 over 200 replications).
pub const DEFAULT_BASE_HAZARD: f64 = 0.07;

pub const DEFAULT_CHECKPOINTS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitModel {
    /// Per-checkpoint exit probability of the worst-placed worker at the
    /// end of the contest. Zero disables exits.
    pub base_hazard: f64,
    /// Number of evenly spaced decision epochs.
    pub checkpoints: u32,
}

impl Default for ExitModel {
    fn default() -> Self {
        ExitModel {
            base_hazard: DEFAULT_BASE_HAZARD,
            checkpoints: DEFAULT_CHECKPOINTS,
        }
    }
}

impl ExitModel {
    pub fn disabled() -> Self {
        ExitModel {
            base_hazard: 0.0,
            ..Self::default()
        }
    }

    pub fn with_base_hazard(base_hazard: f64) -> Self {
        ExitModel {
            base_hazard,
            ..Self::default()
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.base_hazard > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_hazard) {
            return Err(Error::Config(format!(
                "exit base hazard {} outside [0,1]",
                self.base_hazard
            )));
        }
        if self.checkpoints == 0 {
            return Err(Error::Config(
                "exit model needs at least one checkpoint".into(),
            ));
        }
        Ok(())
    }

    /// `h0 * g(gap) * elapsed^2`, where `g(gap) = min(1, gap / n_workers)`
    /// once it exceeds the worker's exit threshold and zero before.
    /// `rank_gap` counts places below the last paid rank, so a worker just
    /// outside the spread has gap zero.
    pub fn hazard(
        &self,
        eligible: bool,
        rank_gap: u32,
        n_workers: u32,
        elapsed_fraction: f64,
        profile: &WorkerProfile,
    ) -> f64 {
        debug_assert!((0.0..=1.0).contains(&elapsed_fraction));
        if eligible || n_workers == 0 {
            return 0.0;
        }
        let gap = (f64::from(rank_gap) / f64::from(n_workers)).min(1.0);
        let gap = if gap > profile.exit_threshold {
            gap
        } else {
            0.0
        };
        let elapsed = elapsed_fraction.clamp(0.0, 1.0);
        (self.base_hazard * gap * elapsed * elapsed).clamp(0.0, 1.0)
    }
}

/// Exit probability for one decision epoch under `model`.
pub fn exit_hazard(
    model: &ExitModel,
    eligible: bool,
    rank_gap: u32,
    n_workers: u32,
    elapsed_fraction: f64,
    profile: &WorkerProfile,
) -> f64 {
    model.hazard(eligible, rank_gap, n_workers, elapsed_fraction, profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> WorkerProfile {
        WorkerProfile::new(0, 0.5, 1.0, 1.0)
    }

    #[test]
    fn eligible_workers_never_exit() {
        let m = ExitModel::default();
        for gap in 0..30 {
            assert_eq!(m.hazard(true, gap, 20, 1.0, &profile()), 0.0);
        }
    }

    #[test]
    fn just_outside_spread_early_is_near_zero() {
        let m = ExitModel::default();
        assert_eq!(m.hazard(false, 0, 20, 0.05, &profile()), 0.0);
        assert!(m.hazard(false, 1, 20, 0.05, &profile()) < 1e-4);
    }

    #[test]
    fn monotone_in_gap_and_time() {
        let m = ExitModel::with_base_hazard(0.3);
        let p = profile();
        for gap in 0..40 {
            for step in 0..20 {
                let f = step as f64 / 20.0;
                let h = m.hazard(false, gap, 20, f, &p);
                assert!((0.0..=1.0).contains(&h));
                assert!(m.hazard(false, gap + 1, 20, f, &p) >= h);
                assert!(m.hazard(false, gap, 20, f + 0.05, &p) >= h);
            }
        }
    }

    #[test]
    fn threshold_suppresses_small_gaps() {
        let m = ExitModel::with_base_hazard(0.5);
        let mut p = profile();
        p.exit_threshold = 0.25;
        assert_eq!(m.hazard(false, 5, 20, 1.0, &p), 0.0);
        assert!(m.hazard(false, 6, 20, 1.0, &p) > 0.0);
    }

    #[test]
    fn validation() {
        assert!(ExitModel::default().validate().is_ok());
        assert!(ExitModel::with_base_hazard(1.5).validate().is_err());
    }
}
