use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scaling;
use crate::ot::{GwParams, SinkhornParams};

const TRAIN_TOL: f64 = 1e-4;
const TRAIN_GW_OUTER: usize = 5;

/// Hyperparameters of the composition and direct training loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the Gromov-Monge gap in every loss.
    pub lambda_gm: f64,
    /// Entropic regularization of the Sinkhorn-divergence fitting loss of `φ`.
    pub eps_fit_phi: f64,
    /// Entropic regularization of the Wasserstein fitting loss of `T` and the direct map.
    pub eps_fit_t: f64,
    /// Entropic regularization of the GW term inside the gap.
    pub eps_gw: f64,
    /// Entropic regularization of the evaluation divergence.
    pub eps_eval: f64,
    pub eta_phi: f64,
    pub eta_t: f64,
    pub batch_n: usize,
    pub k_outer: usize,
    pub k_inner: usize,
    pub pretrain_iters: usize,
    pub direct_iters: usize,
    pub hidden: Vec<usize>,
    /// Master seed; network initializations and batch streams are derived from it.
    pub seed: u64,
    pub scaling_fit: Scaling,
    pub scaling_intra: Scaling,
    /// Solver budget for the fitting losses during training.
    pub sinkhorn: SinkhornParams,
    /// Solver budget for the GW term of the gap during training.
    pub gw: GwParams,
    /// Solver budget for evaluation.
    pub eval_sinkhorn: SinkhornParams,
}

/// Named configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected paper or desk)"
            ))),
        }
    }
}

impl TrainConfig {
    /// Full-size settings: batch 1024, 5000 pre-training steps, 5 × 2000 composition steps.
    pub fn paper() -> Self {
        Self {
            lambda_gm: 1.0,
            eps_fit_phi: 0.01,
            eps_fit_t: 0.001,
            eps_gw: 0.001,
            eps_eval: 0.1,
            eta_phi: 1e-3,
            eta_t: 1e-4,
            batch_n: 1024,
            k_outer: 5,
            k_inner: 2000,
            pretrain_iters: 5000,
            direct_iters: 5000,
            hidden: vec![128, 64, 64],
            seed: 0,
            scaling_fit: Scaling::Mean,
            scaling_intra: Scaling::Max,
            sinkhorn: SinkhornParams {
                max_iter: 2000,
                tol: TRAIN_TOL,
            },
            gw: GwParams {
                outer_iter: TRAIN_GW_OUTER,
                tol: 1e-3,
                sinkhorn: SinkhornParams {
                    max_iter: 2000,
                    tol: TRAIN_TOL,
                },
                anneal: false,
            },
            eval_sinkhorn: SinkhornParams {
                max_iter: 2000,
                tol: 1e-6,
            },
        }
    }

    /// Laptop-size settings: batch 256, 1500 pre-training steps, 5 × 400 composition
    /// steps, and a direct baseline with the same total number of gradient steps.
    pub fn desk() -> Self {
        let mut cfg = Self::paper();
        cfg.batch_n = 256;
        cfg.pretrain_iters = 1500;
        cfg.k_inner = 400;
        cfg.direct_iters = cfg.composition_steps();
        cfg
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Gradient steps taken by pre-training plus the composition loops.
    pub fn composition_steps(&self) -> usize {
        self.pretrain_iters + self.k_outer * (1 + self.k_inner)
    }

    pub fn validate(&self) -> Result<()> {
        let eps = [
            ("eps_fit_phi", self.eps_fit_phi),
            ("eps_fit_t", self.eps_fit_t),
            ("eps_gw", self.eps_gw),
            ("eps_eval", self.eps_eval),
            ("eta_phi", self.eta_phi),
            ("eta_t", self.eta_t),
        ];
        for (name, v) in eps {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_gm >= 0.0 && self.lambda_gm.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_gm must be >= 0, got {}",
                self.lambda_gm
            )));
        }
        if self.batch_n < 2 {
            return Err(Error::Config(format!(
                "batch_n must be >= 2, got {}",
                self.batch_n
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn derived_seed(&self, stream: u64) -> u64 {
        // splitmix64 finalizer over (seed, stream)
        let mut z = self
            .seed
            .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_matches_budget() {
        let d = TrainConfig::desk();
        assert_eq!(d.direct_iters, 1500 + 5 * 401);
        d.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        let cfg = TrainConfig::desk().with_seed(3);
        cfg.save(&p).unwrap();
        assert_eq!(TrainConfig::load(&p).unwrap(), cfg);
        std::fs::write(&p, r#"{"lambda_gm": 1.0}"#).unwrap();
        assert!(matches!(TrainConfig::load(&p), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut c = TrainConfig::paper();
        c.eps_gw = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::paper();
        c.lambda_gm = -1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::paper();
        c.batch_n = 1;
        assert!(c.validate().is_err());
    }
}
