use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelKind};
use crate::nn::RmsPropConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: RmsPropConfig,
    pub seed: u64,
    /// Steps between dev evaluations; 0 disables model selection.
    pub dev_period: usize,
    pub model: ModelConfig,
}

impl TrainConfig {
    /// Small enough for a laptop core: 2000 steps of 16 examples.
    pub fn desk(kind: ModelKind) -> Self {
        TrainConfig {
            kind,
            steps: 2000,
            batch_size: 16,
            optimizer: RmsPropConfig::default(),
            seed: 0,
            dev_period: 200,
            model: ModelConfig::desk(),
        }
    }

    /// 50000 steps of 100 examples with the published layer sizes.
    pub fn paper(kind: ModelKind) -> Self {
        TrainConfig {
            kind,
            steps: 50_000,
            batch_size: 100,
            optimizer: RmsPropConfig::default(),
            seed: 0,
            dev_period: 1000,
            model: ModelConfig::paper(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", o.learning_rate)));
        }
        if !(0.0..1.0).contains(&o.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", o.rho)));
        }
        if !(o.epsilon >= 0.0 && o.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", o.epsilon)));
        }
        self.model.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk(ModelKind::Ct)
    }
}
