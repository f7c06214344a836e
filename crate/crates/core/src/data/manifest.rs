use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{canonical_json, load_sequence, write_file};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Generation,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative paths are resolved against the manifest's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub task: TaskKind,
    pub train: Vec<ManifestEntry>,
    #[serde(default)]
    pub test: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let entries = self.train.iter().chain(&self.test);
        match (self.task, &self.classes) {
            (TaskKind::Generation, _) => {
                if let Some(e) = entries.clone().find(|e| e.label.is_some()) {
                    return Err(Error::InvalidConfig(format!(
                        "generation entry {} carries a label",
                        e.path
                    )));
                }
            }
            (TaskKind::Classification, None) => {
                return Err(Error::InvalidConfig(
                    "classification manifest needs a class list".into(),
                ));
            }
            (TaskKind::Classification, Some(classes)) => {
                for e in entries {
                    match &e.label {
                        None => return Err(Error::InvalidConfig(format!("entry {} has no label", e.path))),
                        Some(l) if !classes.contains(l) => {
                            return Err(Error::InvalidConfig(format!(
                                "entry {} has unknown label {l:?}",
                                e.path
                            )));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        if self.train.is_empty() {
            return Err(Error::InvalidConfig("manifest has no training entries".into()));
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.as_ref()?.iter().position(|c| c == label)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let value = serde_json::to_value(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        write_file(path, canonical_json(&value).as_bytes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Only the training split may be read.
    Training,
    Evaluation,
}

/// Sequences of one split; `labels` is empty for generation manifests.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSplit {
    pub sequences: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
    pub paths: Vec<PathBuf>,
}

/// Reads the files a manifest points to, refusing test files while in the
/// training phase.
#[derive(Clone, Debug)]
pub struct ManifestLoader {
    manifest: DatasetManifest,
    base: PathBuf,
    phase: Phase,
}

impl ManifestLoader {
    pub fn open(path: &Path, phase: Phase) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        manifest.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(ManifestLoader { manifest, base, phase })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Training is over; the test split becomes readable.
    pub fn enter_evaluation(&mut self) {
        self.phase = Phase::Evaluation;
    }

    pub fn load_train(&self) -> Result<LoadedSplit> {
        self.load(&self.manifest.train)
    }

    pub fn load_test(&self) -> Result<LoadedSplit> {
        if self.phase == Phase::Training {
            let path = self
                .manifest
                .test
                .first()
                .map(|e| self.resolve(&e.path))
                .unwrap_or_else(|| self.base.clone());
            return Err(Error::PhaseViolation { path });
        }
        self.load(&self.manifest.test)
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn load(&self, entries: &[ManifestEntry]) -> Result<LoadedSplit> {
        let mut split = LoadedSplit {
            sequences: Vec::with_capacity(entries.len()),
            labels: Vec::new(),
            paths: Vec::with_capacity(entries.len()),
        };
        for entry in entries {
            let path = self.resolve(&entry.path);
            split.sequences.push(load_sequence(&path)?);
            if let Some(label) = &entry.label {
                split.labels.push(self.manifest.class_index(label).expect("validated"));
            }
            split.paths.push(path);
        }
        Ok(split)
    }
}
