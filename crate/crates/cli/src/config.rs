//! Experiment configuration: a TOML file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tempkb_core::data::{Discretization, Format};
use tempkb_core::regularization::EmbeddingReg;
use tempkb_core::training::TrainConfig;
use tempkb_core::ModelKind;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// A preprocessed cache (has `meta.json`) or a raw dataset directory.
    pub path: PathBuf,
    /// Layout of raw files; ignored for caches.
    pub format: Format,
    pub discretization: Discretization,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { path: PathBuf::new(), format: Format::Quadruples, discretization: Discretization::None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Rank right-hand sides only (no subject queries).
    pub rhs_only: bool,
    /// Filter with `(s, p, t)` keys; `false` uses `(s, p)`.
    pub filter_time: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { rhs_only: false, filter_time: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub temporal_strengths: Vec<f64>,
    /// Empty means the rank of `[train]`.
    pub ranks: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { lambdas: vec![1e-3, 1e-2, 1e-1], temporal_strengths: vec![0.0, 1e-3, 1e-2, 1e-1], ranks: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub grid: GridConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("run"),
            checkpoint_every: 1,
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: tempkb_core::Error| e.to_string())
}

fn parse_reg(s: &str) -> Result<EmbeddingReg, String> {
    s.parse().map_err(|e: tempkb_core::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: tempkb_core::Error| e.to_string())
}

fn parse_disc(s: &str) -> Result<Discretization, String> {
    s.parse().map_err(|e: tempkb_core::Error| e.to_string())
}

/// Flags that override the configuration file, field by field.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Experiment configuration (TOML).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    #[arg(long, value_parser = parse_disc)]
    pub discretization: Option<Discretization>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ModelKind>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub adagrad_epsilon: Option<f64>,
    #[arg(long)]
    pub init_std: Option<f64>,
    /// none, omega3, delta2, delta3 or delta4.
    #[arg(long, value_parser = parse_reg)]
    pub reg: Option<EmbeddingReg>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub temporal_strength: Option<f64>,
    #[arg(long)]
    pub temporal_order: Option<u32>,
    #[arg(long)]
    pub temporal_loss: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub valid_every: Option<usize>,
    #[arg(long)]
    pub log_train_mrr: Option<bool>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub rhs_only: Option<bool>,
    #[arg(long)]
    pub filter_time: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub temporal_strengths: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl Overrides {
    /// Reads the configuration file (if any) and applies the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => load(path)?,
            None => ExperimentConfig::default(),
        };
        let o = self.clone();
        set(&mut config.output, o.output);
        set(&mut config.checkpoint_every, o.checkpoint_every);
        set(&mut config.dataset.path, o.dataset);
        set(&mut config.dataset.format, o.format);
        set(&mut config.dataset.discretization, o.discretization);
        let t = &mut config.train;
        set(&mut t.kind, o.kind);
        set(&mut t.rank, o.rank);
        set(&mut t.epochs, o.epochs);
        set(&mut t.batch_size, o.batch_size);
        set(&mut t.learning_rate, o.learning_rate);
        set(&mut t.adagrad_epsilon, o.adagrad_epsilon);
        set(&mut t.init_std, o.init_std);
        set(&mut t.reg.embedding, o.reg);
        set(&mut t.reg.lambda, o.lambda);
        set(&mut t.reg.temporal_strength, o.temporal_strength);
        set(&mut t.reg.temporal_order, o.temporal_order);
        set(&mut t.use_temporal_loss, o.temporal_loss);
        set(&mut t.seed, o.seed);
        set(&mut t.valid_every, o.valid_every);
        set(&mut t.log_train_mrr, o.log_train_mrr);
        set(&mut t.threads, o.threads);
        set(&mut config.eval.rhs_only, o.rhs_only);
        set(&mut config.eval.filter_time, o.filter_time);
        set(&mut config.grid.lambdas, o.lambdas);
        set(&mut config.grid.temporal_strengths, o.temporal_strengths);
        set(&mut config.grid.ranks, o.ranks);
        config.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml(config: &ExperimentConfig) -> String {
    toml::to_string_pretty(config).expect("configuration is always representable in TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(
            &path,
            "output = \"out\"\n[dataset]\npath = \"data\"\nformat = \"yago\"\n[train]\nkind = \"TComplEx\"\nrank = 8\n[train.reg]\nembedding = \"omega3\"\nlambda = 0.01\n",
        )
        .unwrap();
        let flags = Overrides { config: Some(path), rank: Some(12), lambda: Some(0.5), ..Overrides::default() };
        let c = flags.resolve().unwrap();
        assert_eq!(c.output, PathBuf::from("out"));
        assert_eq!(c.dataset.format, Format::Yago);
        assert_eq!(c.train.kind, ModelKind::TComplEx);
        assert_eq!(c.train.rank, 12);
        assert_eq!(c.train.reg.embedding, EmbeddingReg::Omega3);
        assert_eq!(c.train.reg.lambda, 0.5);
        assert_eq!(c.train.batch_size, 1000);
    }

    #[test]
    fn effective_config_roundtrips() {
        let c = ExperimentConfig::default();
        assert_eq!(toml::from_str::<ExperimentConfig>(&to_toml(&c)).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("outptu = \"x\"").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let flags = Overrides { batch_size: Some(0), ..Overrides::default() };
        assert!(matches!(flags.resolve(), Err(CliError::Config(_))));
    }
}
