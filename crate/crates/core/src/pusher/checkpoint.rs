//! Checkpoint directories: `manifest.json` plus `model.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::input::INPUT_FORMAT_VERSION;
use super::neural::NeuralLm;
use super::train::{EpochSummary, TrainerConfig};

pub const CHECKPOINT_FORMAT: &str = "agenda-pusher-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const MODEL: &str = "model.json";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: unsupported checkpoint (format {format:?}, version {version}, input format {input_format})")]
    Unsupported { path: PathBuf, format: String, version: u32, input_format: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub input_format_version: u32,
    pub trainer: Option<TrainerConfig>,
    pub seed: u64,
    pub selected_epoch: Option<usize>,
    pub epochs: Vec<EpochSummary>,
}

impl Manifest {
    pub fn new(trainer: Option<TrainerConfig>, seed: u64, selected_epoch: Option<usize>, epochs: Vec<EpochSummary>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_format_version: INPUT_FORMAT_VERSION,
            trainer,
            seed,
            selected_epoch,
            epochs,
        }
    }
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CheckpointError> {
    let text = serde_json::to_string(value).map_err(|source| CheckpointError::Json { path: path.clone(), source })?;
    fs::write(&path, text).map_err(|source| CheckpointError::Io { path, source })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: PathBuf) -> Result<T, CheckpointError> {
    let text = fs::read_to_string(&path).map_err(|source| CheckpointError::Io { path: path.clone(), source })?;
    serde_json::from_str(&text).map_err(|source| CheckpointError::Json { path, source })
}

pub fn save_checkpoint(dir: impl AsRef<Path>, model: &NeuralLm, manifest: &Manifest) -> Result<(), CheckpointError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| CheckpointError::Io { path: dir.to_path_buf(), source })?;
    write_json(dir.join(MODEL), model)?;
    write_json(dir.join(MANIFEST), manifest)
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(NeuralLm, Manifest), CheckpointError> {
    let dir = dir.as_ref();
    let manifest: Manifest = read_json(dir.join(MANIFEST))?;
    if manifest.format != CHECKPOINT_FORMAT
        || manifest.version != CHECKPOINT_VERSION
        || manifest.input_format_version != INPUT_FORMAT_VERSION
    {
        return Err(CheckpointError::Unsupported {
            path: dir.join(MANIFEST),
            format: manifest.format,
            version: manifest.version,
            input_format: manifest.input_format_version,
        });
    }
    Ok((read_json(dir.join(MODEL))?, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pusher::neural::NeuralLmConfig;
    use crate::pusher::vocab::Vocab;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model = NeuralLm::new(Vocab::build(["a b c"]), NeuralLmConfig { embed_dim: 3, hidden_dim: 4, window: 2, control_slots: 2, seed: 9 });
        let manifest = Manifest::new(Some(TrainerConfig::default()), 9, None, vec![]);
        save_checkpoint(dir.path(), &model, &manifest).unwrap();
        let (m2, man2) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(m2, model);
        assert_eq!(man2, manifest);
    }

    #[test]
    fn rejects_other_versions() {
        let dir = tempfile::tempdir().unwrap();
        let model = NeuralLm::new(Vocab::build(["a"]), NeuralLmConfig::default());
        let mut manifest = Manifest::new(None, 0, None, vec![]);
        manifest.input_format_version = 99;
        save_checkpoint(dir.path(), &model, &manifest).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(CheckpointError::Unsupported { .. })));
    }
}
