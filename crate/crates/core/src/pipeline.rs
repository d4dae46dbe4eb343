//! Run manifests and the data pipeline: load → split → standardize, with
//! noise injection handled by the training loop. A run manifest fully
//! determines a run; its hash names the output directory so reruns
//! overwrite deterministically.

use crate::data::{fit_standardize, load_csv, split, Dataset, Scaler};
use crate::error::{RedError, Result};
use crate::model::ModelConfig;
use crate::numerics::{derive_seed, Rng};
use crate::training::{GridSpace, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

const SPLIT_STREAM: u64 = 0x73706c6974; // "split"

fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}
fn default_true() -> bool {
    true
}

/// Dataset section of a run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataManifest {
    pub path: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default = "default_true")]
    pub stratify: bool,
}

/// Everything that determines a run; persisted verbatim next to outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub data: DataManifest,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpace>,
}

impl RunManifest {
    pub fn from_file(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let manifest: RunManifest = serde_json::from_slice(&bytes)
            .map_err(|e| RedError::Contract(format!("manifest parse: {e}")))?;
        Ok((manifest, bytes))
    }

    /// Hex SHA-256 prefix of the manifest bytes; names the run directory.
    pub fn run_id(bytes: &[u8]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        crate::checkpoint::to_hex(&hasher.finalize())[..16].to_string()
    }
}

/// Standardized splits plus the scaler fitted on the training rows.
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
}

/// load → split (seeded, optionally stratified) → standardize with the
/// training-split scaler. Noise is injected later, by training, on the
/// training matrix only.
pub fn prepare(data: &DataManifest, seed: u64) -> Result<PreparedData> {
    let ds = load_csv(
        Path::new(&data.path),
        data.has_header,
        data.label_column.as_deref(),
    )?;
    prepare_from_dataset(&ds, data, seed)
}

pub fn prepare_from_dataset(ds: &Dataset, data: &DataManifest, seed: u64) -> Result<PreparedData> {
    let mut rng = Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM));
    let (train, val, test) = split(ds, data.split, &mut rng, data.stratify)?;
    let scaler = fit_standardize(&train)?;
    Ok(PreparedData {
        train: scaler.apply(&train)?,
        val: scaler.apply(&val)?,
        test: scaler.apply(&test)?,
        scaler,
    })
}

/// Scaler file stored next to the checkpoint; carries the checkpoint's
/// probe hash so mismatched pairs are detected at load time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalerFile {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub column_names: Vec<String>,
    pub label_column: Option<String>,
    pub model_probe_hash: String,
}

impl ScalerFile {
    pub fn new(
        scaler: &Scaler,
        column_names: Vec<String>,
        label_column: Option<String>,
        model_probe_hash: String,
    ) -> Self {
        ScalerFile {
            means: scaler.means.clone(),
            stds: scaler.stds.clone(),
            column_names,
            label_column,
            model_probe_hash,
        }
    }

    pub fn scaler(&self) -> Scaler {
        Scaler {
            means: self.means.clone(),
            stds: self.stds.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| RedError::Contract(format!("scaler serialization: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| RedError::Integrity(format!("scaler file parse: {e}")))
    }

    /// Confirm this scaler was written for the given model.
    pub fn check_matches(&self, model: &crate::model::RedModel) -> Result<()> {
        let hash = crate::checkpoint::probe_hash_hex(model)?;
        if hash != self.model_probe_hash {
            return Err(RedError::Integrity(
                "scaler file was written for a different checkpoint".into(),
            ));
        }
        Ok(())
    }
}

/// Output paths inside a run directory.
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(out_root: &Path, run_id: &str) -> Self {
        RunPaths {
            dir: out_root.join(format!("run-{run_id}")),
        }
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.redc")
    }

    pub fn scaler(&self) -> PathBuf {
        self.dir.join("scaler.json")
    }

    pub fn history(&self) -> PathBuf {
        self.dir.join("history.csv")
    }

    pub fn manifest_copy(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    pub fn leaderboard(&self) -> PathBuf {
        self.dir.join("leaderboard.csv")
    }
}
