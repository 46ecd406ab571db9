//! Recovering worker behaviour from event logs by maximum likelihood.

pub mod features;
pub mod fit;
pub mod likelihood;
pub mod recovery;

pub use features::{
    FeatureScaling, FeatureVector, FEATURE_DIM, FEATURE_NAMES, FEATURE_SCHEMA_VERSION,
};
pub use fit::{
    fit_log, fit_log_linear, fit_log_linear_traced, fit_two_state, read_fitted_jsonl,
    write_fitted_jsonl, FitOptions, FittedBehavior, ModelKind,
};
pub use likelihood::{
    negative_log_likelihood, nll_gradient, observations, Observation, RateParams,
};
pub use recovery::{recover_profiles, recovery_experiment, RecoveryReport};
