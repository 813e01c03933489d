use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::corpus::DomainSchema;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig, ModelKind};
use crate::nn::{ParamStore, Tensor};
use crate::text::EmbeddingTable;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
}

/// Everything needed to rebuild a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u64,
    pub model: ModelKind,
    pub hyperparams: Hyperparams,
    pub schemas: Vec<DomainSchema>,
    pub params: Vec<NamedTensor>,
    /// Content hash of the embedding table the model was trained with.
    pub embedding_fingerprint: String,
    /// Where that table was loaded from, if it came from a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_path: Option<String>,
}

impl ModelCheckpoint {
    /// `schemas` are the domains the model was trained on; for the concept
    /// tagger they are informational.
    pub fn from_model(
        model: &Model,
        model_config: ModelConfig,
        training: Option<TrainConfig>,
        schemas: &[DomainSchema],
        table: &EmbeddingTable,
    ) -> Result<Self> {
        let params = model
            .params()
            .iter()
            .map(|p| {
                if !p.value.is_finite() {
                    return Err(Error::Numeric(format!("parameter {} is not finite", p.name)));
                }
                Ok(NamedTensor {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    data: p.value.data().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schemas = if model.schemas().is_empty() {
            schemas.to_vec()
        } else {
            model.schemas().to_vec()
        };
        Ok(ModelCheckpoint {
            format_version: FORMAT_VERSION,
            model: model.kind(),
            hyperparams: Hyperparams {
                model: model_config,
                training,
            },
            schemas,
            params,
            embedding_fingerprint: table.fingerprint().to_string(),
            embedding_path: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(FORMAT_VERSION) => {}
            Some(v) => return Err(Error::CheckpointVersion(v)),
            None => return Err(Error::CorruptCheckpoint("missing format_version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Compares fingerprints. A mismatch is an error unless `allow_mismatch`,
    /// in which case it is only logged.
    pub fn check_embeddings(&self, table: &EmbeddingTable, allow_mismatch: bool) -> Result<()> {
        if self.embedding_fingerprint == table.fingerprint() {
            return Ok(());
        }
        if allow_mismatch {
            warn!(
                "embedding table {} differs from the checkpoint's {}; predictions may be meaningless",
                table.fingerprint(),
                self.embedding_fingerprint
            );
            return Ok(());
        }
        Err(Error::FingerprintMismatch {
            expected: self.embedding_fingerprint.clone(),
            actual: table.fingerprint().to_string(),
        })
    }

    /// Rebuilds the model after checking the embedding table.
    pub fn to_model(&self, table: &EmbeddingTable, allow_mismatch: bool) -> Result<Model> {
        self.check_embeddings(table, allow_mismatch)?;
        let mut store = ParamStore::new();
        for p in &self.params {
            let t = Tensor::new(p.shape.clone(), p.data.clone())
                .map_err(|e| Error::CorruptCheckpoint(format!("parameter {}: {e}", p.name)))?;
            store.add(p.name.clone(), t)?;
        }
        let model = Model::from_params(self.model, &self.schemas, store)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        if model.embedding_dim() != table.dim() {
            return Err(Error::Dimension(format!(
                "model expects {}-d embeddings, table has {}",
                model.embedding_dim(),
                table.dim()
            )));
        }
        Ok(model)
    }
}
