use serde::{Deserialize, Serialize};

use crate::sim::AnnotationEvent;

/// Bumped whenever the order or scaling of [`FeatureVector::design`] changes.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// Length of the design row: intercept plus four features.
pub const FEATURE_DIM: usize = 5;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] =
    ["intercept", "rank", "elapsed", "remaining", "eligible"];

/// State of a worker at the start of a holding interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rank: u32,
    pub elapsed_time_ms: u64,
    pub annotations_remaining: u64,
    pub eligible: bool,
}

/// Contest totals used to bring features onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub n_workers: u32,
    pub contest_ms: u64,
    pub annotation_budget: u64,
}

impl FeatureVector {
    pub fn from_event(event: &AnnotationEvent) -> Self {
        FeatureVector {
            rank: event.rank_at_event,
            elapsed_time_ms: event.event_time_ms - event.holding_time_ms,
            annotations_remaining: event.annotations_remaining,
            eligible: event.eligible_at_event,
        }
    }

    /// Standardised design row `[1, rank/W, elapsed/T, remaining/budget, eligible]`.
    pub fn design(&self, scaling: &FeatureScaling) -> [f64; FEATURE_DIM] {
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        [
            1.0,
            ratio(f64::from(self.rank), f64::from(scaling.n_workers)),
            ratio(self.elapsed_time_ms as f64, scaling.contest_ms as f64),
            ratio(
                self.annotations_remaining as f64,
                scaling.annotation_budget as f64,
            ),
            if self.eligible { 1.0 } else { 0.0 },
        ]
    }
}

pub fn dot(theta: &[f64], x: &[f64; FEATURE_DIM]) -> f64 {
    theta.iter().zip(x).map(|(a, b)| a * b).sum()
}
