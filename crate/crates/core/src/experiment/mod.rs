//! Replicated experiments: configuration, synthetic corpora, reward-spread
//! sweeps, statistics and result files.

pub mod config;
pub mod corpus;
pub mod output;
pub mod runner;
pub mod stats;

pub use config::{CorpusSource, ExperimentConfig, CONFIG_FORMAT_VERSION};
pub use corpus::{generate_corpus, read_corpus_jsonl, write_corpus_jsonl};
pub use output::{emit_outputs, write_bundle, Artifact, Manifest};
pub use runner::{
    exit_calibration, run_condition, simulate_condition, sweep, ContestSummary, SweepResult,
    TrendReport, TrendVerdict,
};
pub use stats::{anova_f, sign_test, Anova, SignTest};
