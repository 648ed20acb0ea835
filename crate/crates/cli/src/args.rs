use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isogm::geometry::Shape;
use isogm::trainer::{DataSpec, Preset};

#[derive(Debug, Parser)]
#[command(name = "isogm", version, about = "Gromov-Monge maps through a learned isometry and a transport map")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a source cloud and write X, Z = RX + t and Y = AZ.
    Generate(GenerateArgs),
    /// Train the composition or the direct map and write checkpoints, logs and mapped points.
    Train(TrainArgs),
    /// Brute-force checks of rigid invariance and decomposition on tiny instances.
    OracleCheck(OracleArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradArgs),
    /// Convert point files between CSV and PLY and write a plotting manifest.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    SCurve,
    Spiral,
    GaussianMixture,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::SCurve => Shape::SCurve,
            ShapeArg::Spiral => Shape::Spiral,
            ShapeArg::GaussianMixture => Shape::GaussianMixture,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value = "s-curve")]
    pub shape: ShapeArg,
    /// Training points per cloud.
    #[arg(long, default_value_t = 2048)]
    pub n_total: usize,
    /// Held-out points per cloud.
    #[arg(long, default_value_t = 1024)]
    pub n_eval: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub translation_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    pub shear_magnitude: f64,
    /// Also scale each row of the shear by a seeded factor in [0.5, 1.5].
    #[arg(long)]
    pub anisotropic: bool,
}

impl DataArgs {
    pub fn spec(&self, seed: u64) -> DataSpec {
        let mut spec = DataSpec::for_seed(seed);
        spec.shape = self.shape.into();
        spec.n_total = self.n_total;
        spec.n_eval = self.n_eval;
        spec.noise = self.noise;
        spec.translation_scale = self.translation_scale;
        spec.shear_magnitude = self.shear_magnitude;
        spec.anisotropic = self.anisotropic;
        spec
    }

    pub fn to_flags(&self) -> Vec<String> {
        let shape = match self.shape {
            ShapeArg::SCurve => "s-curve",
            ShapeArg::Spiral => "spiral",
            ShapeArg::GaussianMixture => "gaussian-mixture",
        };
        let mut v = vec![
            "--shape".into(),
            shape.into(),
            "--n-total".into(),
            self.n_total.to_string(),
            "--n-eval".into(),
            self.n_eval.to_string(),
            "--noise".into(),
            self.noise.to_string(),
            "--translation-scale".into(),
            self.translation_scale.to_string(),
            "--shear-magnitude".into(),
            self.shear_magnitude.to_string(),
        ];
        if self.anisotropic {
            v.push("--anisotropic".into());
        }
        v
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Write only CSV files.
    #[arg(long)]
    pub no_ply: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Composition,
    Direct,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Composition => "composition",
            Mode::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Paper,
    Desk,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Paper => Preset::Paper,
            PresetArg::Desk => Preset::Desk,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// One seed, or a comma-separated list run as independent worker processes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seed: Vec<u64>,
    #[arg(long, value_enum, default_value = "composition")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: PresetArg,
    /// JSON training configuration; replaces the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory. Data files go here and run outputs into `<out>/<mode>/`;
    /// with several seeds each one gets `<out>/seed-<s>/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker processes for multi-seed runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub pretrain_iters: Option<usize>,
    #[arg(long)]
    pub k_outer: Option<usize>,
    #[arg(long)]
    pub k_inner: Option<usize>,
    #[arg(long)]
    pub direct_iters: Option<usize>,
    /// Write data files and config.json, then stop before training.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Use a rigid image of the source as the target, so every GM value is zero.
    #[arg(long)]
    pub isomorphic: bool,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Ply,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    /// Run directory written by `train` (both modes).
    #[arg(long)]
    pub run: PathBuf,
    /// Format to convert point files into.
    #[arg(long, value_enum, default_value = "ply")]
    pub to: Format,
}
