use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    St,
    Mt,
    Ct,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::St, ModelKind::Mt, ModelKind::Ct];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::St => "st",
            ModelKind::Mt => "mt",
            ModelKind::Ct => "ct",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "st" => Ok(ModelKind::St),
            "mt" => Ok(ModelKind::Mt),
            "ct" => Ok(ModelKind::Ct),
            _ => Err(Error::Config(format!("unknown model kind '{s}' (expected st, mt or ct)"))),
        }
    }
}

/// Layer widths for all three architectures. Hidden sizes are per direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub st_hidden: usize,
    pub mt_hidden: usize,
    pub ct_hidden1: usize,
    pub ct_combined: usize,
    pub ct_hidden2: usize,
}

impl ModelConfig {
    /// Published sizes: 200-d embeddings, 64/dir single-task, two 128/dir
    /// multi-task layers, concept tagger 128/dir, 128 combined, 64/dir.
    pub fn paper() -> Self {
        ModelConfig {
            embedding_dim: 200,
            st_hidden: 64,
            mt_hidden: 128,
            ct_hidden1: 128,
            ct_combined: 128,
            ct_hidden2: 64,
        }
    }

    /// Same proportions at a quarter of the width, with 50-d embeddings.
    pub fn desk() -> Self {
        ModelConfig {
            embedding_dim: 50,
            st_hidden: 16,
            mt_hidden: 32,
            ct_hidden1: 32,
            ct_combined: 32,
            ct_hidden2: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("embedding_dim", self.embedding_dim),
            ("st_hidden", self.st_hidden),
            ("mt_hidden", self.mt_hidden),
            ("ct_hidden1", self.ct_hidden1),
            ("ct_combined", self.ct_combined),
            ("ct_hidden2", self.ct_hidden2),
        ];
        match widths.iter().find(|(_, w)| *w == 0) {
            Some((name, _)) => Err(Error::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{k}\""));
        }
        assert!(matches!("crf".parse::<ModelKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_width_rejected() {
        let mut c = ModelConfig::desk();
        c.ct_combined = 0;
        assert!(c.validate().is_err());
        assert!(ModelConfig::paper().validate().is_ok());
    }
}
