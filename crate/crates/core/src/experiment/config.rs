use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{ImbalanceMode, LoadOptions, Normalize};
use crate::nn::MlpSpec;
use crate::resampling::SamplerKind;
use crate::trainers::{BaselineConfig, MetaConfig};
use crate::{Error, Result};

/// Where the train/test data come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// A CSV file, split into train and test by `split_seed`.
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        drop_columns: Vec<String>,
        #[serde(default)]
        normalize: Normalize,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default)]
        stratified: bool,
        #[serde(default)]
        split_seed: u64,
    },
    /// Gaussian blobs. The training set starts with `majority_count` rows per
    /// class and every class but 0 is downsampled by `imbalance`; the test
    /// set is balanced with `test_per_class` rows per class.
    Synthetic {
        n_classes: usize,
        dim: usize,
        separation: f64,
        majority_count: usize,
        imbalance: ImbalanceMode,
        test_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_train_fraction() -> f64 {
    0.8
}

impl DataSource {
    pub fn load_options(&self) -> Option<LoadOptions> {
        match self {
            DataSource::Csv {
                label_column,
                drop_columns,
                normalize,
                ..
            } => Some(LoadOptions {
                label_column: label_column.clone(),
                drop_columns: drop_columns.clone(),
                normalize: *normalize,
            }),
            DataSource::Synthetic { .. } => None,
        }
    }

    /// Resolves a relative CSV path against `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let DataSource::Csv { path, .. } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// A named architecture (`fraud`, `loan`) or an explicit spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Preset { preset: String },
    Spec(MlpSpec),
}

impl ModelChoice {
    pub fn resolve(&self) -> Result<MlpSpec> {
        let spec = match self {
            ModelChoice::Spec(s) => s.clone(),
            ModelChoice::Preset { preset } => match preset.as_str() {
                "fraud" => MlpSpec::fraud(),
                "loan" => MlpSpec::loan(),
                other => return Err(Error::Config(format!("unknown model preset {other:?} (expected fraud or loan)"))),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrainerConfig {
    Baseline(BaselineConfig),
    Metabalance(MetaConfig),
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrainerConfig::Baseline(c) => c.validate(),
            TrainerConfig::Metabalance(c) => c.validate(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> TrainerConfig {
        match self {
            TrainerConfig::Baseline(c) => TrainerConfig::Baseline(BaselineConfig { seed, ..c.clone() }),
            TrainerConfig::Metabalance(c) => TrainerConfig::Metabalance(MetaConfig { seed, ..c.clone() }),
        }
    }

    pub fn epochs(&self) -> usize {
        match self {
            TrainerConfig::Baseline(c) => c.epochs,
            TrainerConfig::Metabalance(c) => c.epochs,
        }
    }
}

/// Inner (rows) and outer (columns) sampler kinds of a strategy grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub inner: Vec<SamplerKind>,
    pub outer: Vec<SamplerKind>,
}

/// One experiment: data, model, trainer and the seeds to repeat it over.
/// Stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Evaluate train and test curves every this many epochs (0: last epoch only).
    #[serde(default = "one")]
    pub monitor_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    pub model: ModelChoice,
    pub trainer: TrainerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.model.resolve()?;
        self.trainer.validate()?;
        match &self.data {
            DataSource::Csv { train_fraction, .. } if !(*train_fraction > 0.0 && *train_fraction < 1.0) => {
                return Err(Error::Config(format!("train fraction {train_fraction} must lie in (0, 1)")));
            }
            DataSource::Synthetic {
                majority_count,
                test_per_class,
                ..
            } if *majority_count == 0 || *test_per_class == 0 => {
                return Err(Error::Config("synthetic counts must be >= 1".into()));
            }
            _ => {}
        }
        if let Some(g) = &self.grid {
            if g.inner.is_empty() || g.outer.is_empty() {
                return Err(Error::Config("grid needs at least one inner and one outer kind".into()));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative data paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.data.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}
