//! Experiment configuration and its flat TOML file format.
//!
//! ```toml
//! format_version = 1
//! n_workers = 20
//! spreads = [1, 5, 10]
//! replications = 50
//! master_seed = 7
//! ```
//!
//! Every key is optional except `format_version`; missing keys take the
//! scaled field defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contest::ContestConfig;
use crate::error::{Error, Result};
use crate::sim::{BehaviorPrior, ExitModel};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CorpusSource {
    Generate { mean_entities: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `reward_spread` here is used by single contests; sweeps override it.
    pub contest: ContestConfig,
    pub behavior_prior: BehaviorPrior,
    pub exit: ExitModel,
    pub accuracy_floor: f64,
    pub spreads: Vec<u32>,
    pub replications: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusSource,
    /// Give every worker `lambda_out = lambda_in`, removing the incentive
    /// effect on rates.
    pub equal_rates: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            contest: ContestConfig::scaled_defaults(),
            behavior_prior: BehaviorPrior::default(),
            exit: ExitModel::default(),
            accuracy_floor: 0.0,
            spreads: vec![1, 5, 10],
            replications: 50,
            master_seed: 7,
            output_dir: PathBuf::from("out"),
            corpus: CorpusSource::Generate { mean_entities: 1.2 },
            equal_rates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    format_version: Option<u32>,
    n_workers: u32,
    n_posts: u64,
    window_size: u32,
    task_unit_time_s: f64,
    task_unit_size: u32,
    arrival_rate: f64,
    reward_spread: u32,
    prize_value: f64,
    base_points: u32,
    leaderboard_k: u32,
    quality_constraint: u64,
    reduction_rate: f64,
    gamma_shape: f64,
    gamma_rate: f64,
    halfnormal_sigma: f64,
    exit_base_hazard: f64,
    exit_checkpoints: u32,
    accuracy_floor: f64,
    spreads: Vec<u32>,
    replications: u32,
    master_seed: u64,
    output_dir: String,
    /// `"generate"` or the path of a corpus file.
    corpus: String,
    mean_entities: f64,
    equal_rates: bool,
}

impl Default for FlatConfig {
    fn default() -> Self {
        let mut flat = FlatConfig::from(&ExperimentConfig::default());
        flat.format_version = None;
        flat
    }
}

impl From<&ExperimentConfig> for FlatConfig {
    fn from(c: &ExperimentConfig) -> Self {
        let (corpus, mean_entities) = match &c.corpus {
            CorpusSource::Generate { mean_entities } => ("generate".to_string(), *mean_entities),
            CorpusSource::File(p) => (p.display().to_string(), 1.2),
        };
        FlatConfig {
            format_version: Some(CONFIG_FORMAT_VERSION),
            n_workers: c.contest.n_workers,
            n_posts: c.contest.n_posts,
            window_size: c.contest.window_size,
            task_unit_time_s: c.contest.task_unit_time_s,
            task_unit_size: c.contest.task_unit_size,
            arrival_rate: c.contest.arrival_rate,
            reward_spread: c.contest.reward_spread,
            prize_value: c.contest.prize_value,
            base_points: c.contest.base_points,
            leaderboard_k: c.contest.leaderboard_k,
            quality_constraint: c.contest.quality_constraint,
            reduction_rate: c.contest.reduction_rate,
            gamma_shape: c.behavior_prior.gamma_shape,
            gamma_rate: c.behavior_prior.gamma_rate,
            halfnormal_sigma: c.behavior_prior.halfnormal_sigma,
            exit_base_hazard: c.exit.base_hazard,
            exit_checkpoints: c.exit.checkpoints,
            accuracy_floor: c.accuracy_floor,
            spreads: c.spreads.clone(),
            replications: c.replications,
            master_seed: c.master_seed,
            output_dir: c.output_dir.display().to_string(),
            corpus,
            mean_entities,
            equal_rates: c.equal_rates,
        }
    }
}

impl FlatConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        match self.format_version {
            Some(CONFIG_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Config(format!(
                    "config format_version {v} not supported (expected {CONFIG_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Config("config is missing format_version".into())),
        }
        let corpus = if self.corpus == "generate" {
            CorpusSource::Generate {
                mean_entities: self.mean_entities,
            }
        } else {
            CorpusSource::File(PathBuf::from(self.corpus))
        };
        Ok(ExperimentConfig {
            contest: ContestConfig {
                n_workers: self.n_workers,
                n_posts: self.n_posts,
                window_size: self.window_size,
                task_unit_time_s: self.task_unit_time_s,
                task_unit_size: self.task_unit_size,
                arrival_rate: self.arrival_rate,
                reward_spread: self.reward_spread,
                prize_value: self.prize_value,
                base_points: self.base_points,
                leaderboard_k: self.leaderboard_k,
                quality_constraint: self.quality_constraint,
                reduction_rate: self.reduction_rate,
            },
            behavior_prior: BehaviorPrior {
                gamma_shape: self.gamma_shape,
                gamma_rate: self.gamma_rate,
                halfnormal_sigma: self.halfnormal_sigma,
            },
            exit: ExitModel {
                base_hazard: self.exit_base_hazard,
                checkpoints: self.exit_checkpoints,
            },
            accuracy_floor: self.accuracy_floor,
            spreads: self.spreads,
            replications: self.replications,
            master_seed: self.master_seed,
            output_dir: PathBuf::from(self.output_dir),
            corpus,
            equal_rates: self.equal_rates,
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let flat: FlatConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let config = flat.into_config()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let parse_error = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| parse_error(e.to_string()))?;
        Self::from_toml_str(&text).map_err(|e| parse_error(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&FlatConfig::from(self)).map_err(|e| Error::Config(e.to_string()))
    }

    /// Set one flat key from its TOML text, e.g. `("replications", "10")` or
    /// `("spreads", "[1, 2]")`. Bare words are taken as strings.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply_overrides(&[(key, value)])
    }

    /// Apply several overrides together, validating only the result, so
    /// that e.g. `n_workers` and `reward_spread` can shrink at once.
    pub fn apply_overrides(&mut self, pairs: &[(&str, &str)]) -> Result<()> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml_string()?).map_err(|e| Error::Config(e.to_string()))?;
        for &(key, value) in pairs {
            let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            table.insert(key.to_string(), parsed);
        }
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        let shown: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        *self = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("override {}: {e}", shown.join(" "))))?;
        Ok(())
    }

    /// The contest run under reward spread `spread`.
    pub fn contest_for(&self, spread: u32) -> ContestConfig {
        ContestConfig {
            reward_spread: spread,
            ..self.contest.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.contest.validate()?;
        self.behavior_prior.validate()?;
        self.exit.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.spreads.is_empty() {
            return Err(Error::Config("spreads must not be empty".into()));
        }
        for &s in &self.spreads {
            self.contest_for(s).validate()?;
        }
        if !(0.0..=1.0).contains(&self.accuracy_floor) {
            return Err(Error::Config("accuracy_floor outside [0,1]".into()));
        }
        if let CorpusSource::Generate { mean_entities } = self.corpus {
            if !(mean_entities > 0.0 && mean_entities.is_finite()) {
                return Err(Error::Config("mean_entities must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = c.to_toml_string().unwrap();
        assert!(text.contains("format_version = 1"));
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "format_version = 1\nreplications = 3\nspreads = [2, 4]\n",
        )
        .unwrap();
        assert_eq!(c.replications, 3);
        assert_eq!(c.spreads, vec![2, 4]);
        assert_eq!(c.contest, ContestConfig::scaled_defaults());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ExperimentConfig::from_toml_str("replications = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("format_version = 2\n").is_err());
        assert!(ExperimentConfig::from_toml_str("format_version = 1\nreplicatoins = 3\n").is_err());
        assert!(
            ExperimentConfig::from_toml_str("format_version = 1\nspreads = [1, 50]\n").is_err()
        );
        assert!(ExperimentConfig::from_toml_str("format_version = 1\nreplications = 0\n").is_err());
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_override("replications", "4").unwrap();
        c.apply_override("spreads", "[1, 2, 3]").unwrap();
        c.apply_override("corpus", "posts.jsonl").unwrap();
        c.apply_override("exit_base_hazard", "0.0").unwrap();
        assert_eq!(c.replications, 4);
        assert_eq!(c.spreads, vec![1, 2, 3]);
        assert_eq!(c.corpus, CorpusSource::File(PathBuf::from("posts.jsonl")));
        assert!(!c.exit.is_enabled());
        assert!(c.apply_override("no_such_key", "1").is_err());
        assert!(c.apply_override("n_workers", "2").is_err());
        c.apply_overrides(&[
            ("n_workers", "2"),
            ("reward_spread", "1"),
            ("spreads", "[1, 2]"),
            ("arrival_rate", "1.0"),
        ])
        .unwrap();
        assert_eq!(c.contest.n_workers, 2);
        assert_eq!(c.contest.arrival_rate, 1.0);
    }
}
