//! Run configuration: a JSON file plus one-for-one flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Locate,
    Interpret,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Locate => write!(f, "locate"),
            Task::Interpret => write!(f, "interpret"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AblateBranch {
    Sense,
    Pron,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub xml: PathBuf,
    pub gold_location: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_senses: Option<PathBuf>,
    pub cmudict: PathBuf,
    pub sense_tsv: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelDims {
    pub d_s: usize,
    pub d_p: usize,
    pub d_attn: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub max_len: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_s: 50,
            d_p: 16,
            d_attn: 16,
            d_model: 32,
            n_layers: 1,
            max_len: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Training {
    /// Mandatory: every run names its seed.
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// When absent, a per-task default applies (0.01 locate, 0.003 interpret).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub parallel_folds: bool,
}

fn default_epochs() -> usize {
    50
}
fn default_k_folds() -> usize {
    10
}
fn default_batch_size() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelDims,
    pub training: Training,
    pub task: Task,
    #[serde(default)]
    pub mfs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablate: Option<AblateBranch>,
}

impl RunConfig {
    pub fn learning_rate(&self) -> f64 {
        self.training.lr.unwrap_or(match self.task {
            Task::Locate => 0.01,
            Task::Interpret => 0.003,
        })
    }

    pub fn use_sense(&self) -> bool {
        !matches!(self.ablate, Some(AblateBranch::Sense))
    }

    pub fn use_pron(&self) -> bool {
        !matches!(self.ablate, Some(AblateBranch::Pron))
    }

    /// Check that every input path the run will read actually exists.
    pub fn check_paths(&self) -> Result<(), CliError> {
        let mut required: Vec<(&str, &Path)> = vec![
            ("xml", &self.paths.xml),
            ("gold_location", &self.paths.gold_location),
            ("cmudict", &self.paths.cmudict),
            ("sense_tsv", &self.paths.sense_tsv),
        ];
        if let Some(senses) = &self.paths.gold_senses {
            required.push(("gold_senses", senses));
        }
        for (name, path) in required {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "{name} path does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Flag-level overrides applied on top of the config file, one for one.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub mfs: bool,
    pub ablate: Option<AblateBranch>,
    pub parallel_folds: bool,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
    if let Some(seed) = overrides.seed {
        config.training.seed = seed;
    }
    if let Some(task) = overrides.task {
        config.task = task;
    }
    if overrides.mfs {
        config.mfs = true;
    }
    if let Some(branch) = overrides.ablate {
        config.ablate = Some(branch);
    }
    if overrides.parallel_folds {
        config.training.parallel_folds = true;
    }
    Ok(config)
}
