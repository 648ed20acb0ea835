use std::path::{Path, PathBuf};

use isogm::geometry::io::{write_csv, write_ply};
use isogm::trainer::{DataSpec, TrainConfig, Tripod};
use isogm::{Error, PointCloud};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e).into())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()).into())
}

/// Writes `<dir>/<stem>.csv` and, unless `csv_only`, `<dir>/<stem>.ply`.
pub fn write_cloud(cloud: &PointCloud, dir: &Path, stem: &str, csv_only: bool) -> Result<(), Failure> {
    write_csv(cloud, &dir.join(format!("{stem}.csv")))?;
    if !csv_only {
        write_ply(cloud, &dir.join(format!("{stem}.ply")))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformsFile {
    pub seed: u64,
    pub data: DataSpec,
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
    pub shear: Vec<Vec<f64>>,
}

fn rows(m: ndarray::ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// X, Z, Y (training and held-out) plus transforms.json.
pub fn write_tripod(
    tripod: &Tripod,
    spec: &DataSpec,
    seed: u64,
    dir: &Path,
    csv_only: bool,
) -> Result<(), Failure> {
    create_dir(dir)?;
    write_cloud(&tripod.source, dir, "X", csv_only)?;
    write_cloud(&tripod.reference, dir, "Z", csv_only)?;
    write_cloud(&tripod.target, dir, "Y", csv_only)?;
    write_cloud(&tripod.source_eval, dir, "X_eval", true)?;
    write_cloud(&tripod.reference_eval, dir, "Z_eval", true)?;
    write_cloud(&tripod.target_eval, dir, "Y_eval", true)?;
    let transforms = TransformsFile {
        seed,
        data: spec.clone(),
        rotation: rows(tripod.rigid.rotation()),
        translation: tripod.rigid.translation().to_vec(),
        shear: rows(tripod.shear.matrix()),
    };
    write_json(&transforms, &dir.join("transforms.json"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalLosses {
    pub fitting_loss: f64,
    pub gm_gap: f64,
    pub total_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Evaluation divergence on the held-out clouds.
    pub eval_divergence: Option<f64>,
    pub eval_divergence_train: Option<f64>,
    pub gradient_steps: usize,
    pub solver_warnings: usize,
    pub final_losses: Option<FinalLosses>,
    pub runtime_seconds: f64,
    pub config: TrainConfig,
    pub data: DataSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Panels {
    pub target: PathBuf,
    pub composed: PathBuf,
    pub direct: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub source: PathBuf,
    pub reference: PathBuf,
    pub target: PathBuf,
    /// The three clouds compared side by side: ground truth, composed map, direct map.
    pub panels: Panels,
    pub train_logs: ModePaths,
    pub summaries: ModePaths,
    pub eval_divergence: ModeValues,
    pub config: ModeConfigs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModePaths {
    pub composition: PathBuf,
    pub direct: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeValues {
    pub composition: Option<f64>,
    pub direct: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeConfigs {
    pub composition: TrainConfig,
    pub direct: TrainConfig,
}
