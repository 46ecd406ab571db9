use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crowd_contest::experiment::output::{
    jsonl_bytes, sweep_artifacts, trajectories_csv, write_bundle, Artifact,
};
use crowd_contest::experiment::{
    generate_corpus, simulate_condition, sweep, write_corpus_jsonl, CorpusSource, ExperimentConfig,
};
use crowd_contest::inference::{
    fit_log, recovery_experiment, write_fitted_jsonl, FitOptions, ModelKind,
};
use crowd_contest::sim::sampling::substream;
use crowd_contest::sim::EventLog;
use crowd_contest::{Error, Result};

#[derive(Parser)]
#[command(
    name = "crowd-contest",
    version,
    about = "Simulate annotation contests and fit worker rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides `master_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one config key, e.g. `--set replications=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one contest at the configured reward spread.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run every configured spread for every replication.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Fit worker rates to an event log.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::TwoState)]
        model: Model,
    },
    /// Draw workers from the prior, race them and fit their rates back.
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        workers: u32,
        /// Events per state each worker needs before fitting.
        #[arg(long, default_value_t = 1000)]
        target: u64,
        /// Number of seeds, counting up from the master seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Write a synthetic corpus.
    GenCorpus {
        #[command(flatten)]
        common: Common,
        /// Number of posts; defaults to the config's `n_posts`.
        #[arg(long)]
        posts: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    TwoState,
    LogLinear,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let pairs = self
            .set
            .iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !pairs.is_empty() {
            config.apply_overrides(&pairs)?;
        }
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

/// The resolved config, with `output_dir` pointing at the bundle itself so
/// that the bytes do not depend on where the bundle was written.
fn config_artifact(config: &ExperimentConfig) -> Result<Artifact> {
    let copy = ExperimentConfig {
        output_dir: PathBuf::from("."),
        ..config.clone()
    };
    Ok(Artifact::new(
        "config.toml",
        copy.to_toml_string()?.into_bytes(),
    ))
}

fn finish(dir: &Path, artifacts: Vec<Artifact>) -> Result<()> {
    let manifest = write_bundle(dir, &artifacts)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, dir.join(&f.path).display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let config = common.resolve()?;
            let spread = config.contest.reward_spread;
            let (log, summary) = simulate_condition(&config, spread, 0, None)?;
            finish(
                &config.output_dir,
                vec![
                    config_artifact(&config)?,
                    Artifact::new("events.jsonl", log.to_jsonl_bytes()?),
                    Artifact::new("summary.json", serde_json::to_vec_pretty(&summary)?),
                    Artifact::new(
                        "trajectories.csv",
                        trajectories_csv(std::slice::from_ref(&log))?,
                    ),
                ],
            )
        }
        Command::Sweep { common } => {
            let config = common.resolve()?;
            let result = sweep(&config)?;
            let mut fitted = Vec::new();
            for log in &result.sample_logs {
                fitted.extend(fit_log(log, ModelKind::TwoState, &FitOptions::default())?);
            }
            let mut artifacts = vec![config_artifact(&config)?];
            artifacts.extend(sweep_artifacts(&result, &fitted)?);
            finish(&config.output_dir, artifacts)?;
            for f in &result.failures {
                eprintln!(
                    "replication {} at spread {} failed: {}",
                    f.replication, f.spread, f.error
                );
            }
            eprintln!("trend: {:?}", result.trend.verdict);
            Ok(())
        }
        Command::Fit { common, log, model } => {
            let config = common.resolve()?;
            let file = std::fs::File::open(&log)?;
            let events = EventLog::read_jsonl(std::io::BufReader::new(file))?;
            events.verify()?;
            let kind = match model {
                Model::TwoState => ModelKind::TwoState,
                Model::LogLinear => ModelKind::LogLinear,
            };
            let fits = fit_log(&events, kind, &FitOptions::default())?;
            let mut bytes = Vec::new();
            write_fitted_jsonl(&fits, &mut bytes)?;
            finish(
                &config.output_dir,
                vec![Artifact::new("fitted.jsonl", bytes)],
            )
        }
        Command::Recover {
            common,
            workers,
            target,
            seeds,
        } => {
            let config = common.resolve()?;
            let seeds: Vec<u64> = (0..seeds)
                .map(|i| config.master_seed.wrapping_add(i))
                .collect();
            let report = recovery_experiment(&config.behavior_prior, workers, target, &seeds)?;
            eprintln!(
                "mean relative error: in {:?}, out {:?}",
                report.mean_rel_err_in, report.mean_rel_err_out
            );
            finish(
                &config.output_dir,
                vec![
                    Artifact::new("recovery.json", serde_json::to_vec_pretty(&report)?),
                    Artifact::new("recovery_seeds.jsonl", jsonl_bytes(&report.seeds)?),
                ],
            )
        }
        Command::GenCorpus { common, posts } => {
            let config = common.resolve()?;
            let mean = match &config.corpus {
                CorpusSource::Generate { mean_entities } => *mean_entities,
                CorpusSource::File(p) => {
                    return Err(Error::Config(format!(
                        "gen-corpus needs corpus = \"generate\", config names file {}",
                        p.display()
                    )))
                }
            };
            let n = posts.unwrap_or(config.contest.n_posts);
            let corpus = generate_corpus(n, &mut substream(config.master_seed, 1), mean)?;
            let mut bytes = Vec::new();
            write_corpus_jsonl(&corpus, &mut bytes)?;
            finish(
                &config.output_dir,
                vec![Artifact::new("corpus.jsonl", bytes)],
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
