//! Contest simulation: behaviour sampling, the CTMC event engine, worker
//! exits and the event log it produces.

pub mod engine;
pub mod exit;
pub mod log;
pub mod sampling;

pub use engine::{run_contest, run_contest_with, simulate_annotated_count, RateModel, SimOptions};
pub use exit::{exit_hazard, ExitModel, DEFAULT_BASE_HAZARD, DEFAULT_CHECKPOINTS};
pub use log::{AnnotationEvent, CensoredInterval, EventLog, ExitEvent, LOG_FORMAT_VERSION};
pub use sampling::{
    draw_behavior, half_normal, holding_time, BehaviorPrior, GammaSampler, Purpose, SimRng,
};
