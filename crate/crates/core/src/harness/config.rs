use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::PathwayConfig;

/// Input files of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub actions: Option<PathBuf>,
    pub objects: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

/// Model plus optimisation settings.
///
/// ```toml
/// seed = 7
/// epochs = 5
///
/// [model]
/// variant = "aopath-s"
/// k = 15
///
/// [paths]
/// train = "data/train.jsonl"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: PathwayConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Seeds parameter initialisation.
    pub seed: u64,
    /// Seeds per-epoch shuffling; defaults to `seed + 1`.
    pub shuffle_seed: Option<u64>,
    pub paths: DataPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: PathwayConfig::default(),
            epochs: 5,
            batch_size: 32,
            lr: 3e-4,
            seed: 0,
            shuffle_seed: None,
            paths: DataPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn for_model(model: PathwayConfig) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
