//! Simulation and inference for paid annotation contests.
//!
//! Workers race through a stream of posts. Each worker is a continuous-time
//! Markov chain whose annotation rate depends on whether its leaderboard
//! rank currently falls inside the reward spread. The crate covers:
//!
//! - [`contest`]: scoring, ranking, eligibility and the requester's knobs;
//! - [`stream`]: windows, round-robin bins and the drop queue;
//! - [`sim`]: behaviour sampling, the event engine and worker exits;
//! - [`inference`]: maximum-likelihood recovery of rates from event logs;
//! - [`experiment`]: replicated sweeps over the reward spread and their
//!   result files.
//!
//! ```
//! use crowd_contest::contest::{ContestConfig, WorkerProfile};
//! use crowd_contest::experiment::generate_corpus;
//! use crowd_contest::sim::{run_contest, sampling::substream};
//!
//! let config = ContestConfig { reward_spread: 2, ..ContestConfig::scaled_defaults() };
//! let profiles: Vec<_> = (0..config.n_workers).map(|i| WorkerProfile::new(i, 0.7, 1.2, 1.0)).collect();
//! let posts = generate_corpus(config.n_posts, &mut substream(1, 1), 1.2).unwrap();
//! let log = run_contest(&config, &profiles, &posts, 1).unwrap();
//! log.verify().unwrap();
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contest;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};
