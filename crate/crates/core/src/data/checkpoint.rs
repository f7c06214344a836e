use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{canonical_json, write_file, NormStats, TaskKind};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::training::Readout;

/// Trained weights plus everything needed to evaluate them again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub task: TaskKind,
    pub model: Model,
    pub norm: Option<NormStats>,
    pub readout: Readout,
    pub seed: u64,
}

impl Checkpoint {
    pub fn to_canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::InvalidData(e.to_string()))?;
        Ok(canonical_json(&value))
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_canonical_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let checkpoint = Checkpoint::from_json(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if let Model::Cwrnn(p) = &checkpoint.model {
            p.validate()?;
        }
        Ok(checkpoint)
    }
}
