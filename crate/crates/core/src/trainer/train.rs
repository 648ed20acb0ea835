use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::{map_loss, Fit, LossEval};
use crate::error::{Error, Result};
use crate::geometry::{Metric, PointCloud, Scaling};
use crate::neural::{AdamState, MlpMap};
use crate::ot::sinkhorn_divergence;

/// Losses above this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Outer,
    Inner,
    Direct,
}

impl Stage {
    fn as_str(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Outer => "outer",
            Stage::Inner => "inner",
            Stage::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub stage: Stage,
    pub iteration: usize,
    pub fitting_loss: f64,
    pub gm_gap: f64,
    pub total_loss: f64,
    pub distortion: f64,
    pub gw_cost: f64,
    pub converged: bool,
    /// Seconds since the start of the stage.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    /// Steps on which an inner solver hit its iteration budget.
    pub solver_warnings: usize,
}

impl TrainLog {
    pub fn extend(&mut self, other: TrainLog) {
        self.records.extend(other.records);
        self.solver_warnings += other.solver_warnings;
    }

    pub fn last(&self, stage: Stage) -> Option<&LogRecord> {
        self.records.iter().rev().find(|r| r.stage == stage)
    }

    /// One row per step. Every column except `wall_time` is reproducible.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record([
            "stage",
            "iteration",
            "fitting_loss",
            "gm_gap",
            "total_loss",
            "distortion",
            "gw_cost",
            "converged",
            "wall_time",
        ])?;
        for r in &self.records {
            w.write_record([
                r.stage.as_str().to_string(),
                r.iteration.to_string(),
                r.fitting_loss.to_string(),
                r.gm_gap.to_string(),
                r.total_loss.to_string(),
                r.distortion.to_string(),
                r.gw_cost.to_string(),
                r.converged.to_string(),
                format!("{:.6}", r.wall_time),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Uniform sampling with replacement from a fixed cloud.
struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn batch(&mut self, cloud: &PointCloud, n: usize) -> PointCloud {
        let idx: Vec<usize> = (0..n).map(|_| self.rng.random_range(0..cloud.len())).collect();
        cloud.select(&idx)
    }
}

// seed streams
const STREAM_PRETRAIN: u64 = 1;
const STREAM_COMPOSITION: u64 = 2;
const STREAM_DIRECT: u64 = 3;

struct Stepper<'a> {
    cfg: &'a TrainConfig,
    stage: Stage,
    start: Instant,
    log: TrainLog,
}

impl Stepper<'_> {
    /// One loss evaluation and optimizer update. On failure `map` is restored to
    /// its state before the step.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        map: &mut MlpMap,
        opt: &mut AdamState,
        source: &PointCloud,
        target: &PointCloud,
        fit: Fit,
        eps_fit: f64,
        iteration: usize,
    ) -> Result<LossEval> {
        let snapshot = map.clone();
        let result = self.try_step(map, opt, source, target, fit, eps_fit, iteration);
        if result.is_err() {
            *map = snapshot;
        }
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn try_step(
        &mut self,
        map: &mut MlpMap,
        opt: &mut AdamState,
        source: &PointCloud,
        target: &PointCloud,
        fit: Fit,
        eps_fit: f64,
        iteration: usize,
    ) -> Result<LossEval> {
        let diverged = |loss: f64| Error::Diverged {
            stage: self.stage.as_str().into(),
            iteration,
            loss,
        };
        let eval = match map_loss(map, source, target, fit, eps_fit, self.cfg) {
            Ok(e) => e,
            // a network that emits non-finite points has already diverged
            Err(Error::InvalidInput(_)) => return Err(diverged(f64::NAN)),
            Err(e) => return Err(e),
        };
        if !eval.total.is_finite() || eval.total.abs() > DIVERGENCE_LIMIT {
            return Err(diverged(eval.total));
        }
        opt.step(map, &eval.grads).map_err(|_| diverged(eval.total))?;
        if !eval.converged {
            self.log.solver_warnings += 1;
        }
        self.log.records.push(LogRecord {
            stage: self.stage,
            iteration,
            fitting_loss: eval.fitting,
            gm_gap: eval.gap,
            total_loss: eval.total,
            distortion: eval.distortion,
            gw_cost: eval.gw_cost,
            converged: eval.converged,
            wall_time: self.start.elapsed().as_secs_f64(),
        });
        Ok(eval)
    }
}

fn check_dims(map: &MlpMap, source: &PointCloud, target: &PointCloud) -> Result<()> {
    if map.input_dim() != source.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: map.input_dim(),
        });
    }
    if map.output_dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: map.output_dim(),
            right: target.dim(),
        });
    }
    Ok(())
}

/// Fits `φ` as a direct map from the source onto the reference for `iters` steps.
pub fn pretrain_phi(
    phi: &mut MlpMap,
    source: &PointCloud,
    reference: &PointCloud,
    cfg: &TrainConfig,
    iters: usize,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_dims(phi, source, reference)?;
    let mut sampler = Sampler::new(cfg.derived_seed(STREAM_PRETRAIN));
    let mut opt = AdamState::new(phi, cfg.eta_phi);
    let mut st = Stepper {
        cfg,
        stage: Stage::Pretrain,
        start: Instant::now(),
        log: TrainLog::default(),
    };
    for it in 0..iters {
        let xb = sampler.batch(source, cfg.batch_n);
        let zb = sampler.batch(reference, cfg.batch_n);
        st.step(phi, &mut opt, &xb, &zb, Fit::Divergence, cfg.eps_fit_phi, it)?;
    }
    Ok(st.log)
}

/// Nested loops of the composition: each of `k_outer` rounds takes one step on
/// `φ`, then `k_inner` steps on `T` with `ρ' = φ♯µ` recomputed from a fresh source
/// batch every inner step.
pub fn train_composition(
    phi: &mut MlpMap,
    tmap: &mut MlpMap,
    source: &PointCloud,
    reference: &PointCloud,
    target: &PointCloud,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_dims(phi, source, reference)?;
    if tmap.input_dim() != phi.output_dim() || tmap.output_dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: phi.output_dim(),
            right: tmap.input_dim(),
        });
    }
    let mut sampler = Sampler::new(cfg.derived_seed(STREAM_COMPOSITION));
    let mut opt_phi = AdamState::new(phi, cfg.eta_phi);
    let mut opt_t = AdamState::new(tmap, cfg.eta_t);
    let start = Instant::now();
    let mut outer = Stepper {
        cfg,
        stage: Stage::Outer,
        start,
        log: TrainLog::default(),
    };
    let mut inner = Stepper {
        cfg,
        stage: Stage::Inner,
        start,
        log: TrainLog::default(),
    };
    let mut log = TrainLog::default();
    for k in 0..cfg.k_outer {
        let xb = sampler.batch(source, cfg.batch_n);
        let zb = sampler.batch(reference, cfg.batch_n);
        outer.step(phi, &mut opt_phi, &xb, &zb, Fit::Divergence, cfg.eps_fit_phi, k)?;
        log.extend(std::mem::take(&mut outer.log));
        for j in 0..cfg.k_inner {
            let xb = sampler.batch(source, cfg.batch_n);
            let zprime = PointCloud::new(phi.predict(xb.points())?)?;
            let yb = sampler.batch(target, cfg.batch_n);
            inner.step(
                tmap,
                &mut opt_t,
                &zprime,
                &yb,
                Fit::Wasserstein,
                cfg.eps_fit_t,
                k * cfg.k_inner + j,
            )?;
        }
        log.extend(std::mem::take(&mut inner.log));
    }
    Ok(log)
}

/// Single-loop baseline: a network from the source straight to the target,
/// trained with the same loss as `T`.
pub fn train_direct(
    tdirect: &mut MlpMap,
    source: &PointCloud,
    target: &PointCloud,
    cfg: &TrainConfig,
    iters: usize,
) -> Result<TrainLog> {
    cfg.validate()?;
    check_dims(tdirect, source, target)?;
    let mut sampler = Sampler::new(cfg.derived_seed(STREAM_DIRECT));
    let mut opt = AdamState::new(tdirect, cfg.eta_t);
    let mut st = Stepper {
        cfg,
        stage: Stage::Direct,
        start: Instant::now(),
        log: TrainLog::default(),
    };
    for it in 0..iters {
        let xb = sampler.batch(source, cfg.batch_n);
        let yb = sampler.batch(target, cfg.batch_n);
        st.step(tdirect, &mut opt, &xb, &yb, Fit::Wasserstein, cfg.eps_fit_t, it)?;
    }
    Ok(st.log)
}

/// Squared-Euclidean Sinkhorn divergence at `eps_eval` on unscaled costs.
pub fn evaluate(mapped: &PointCloud, target: &PointCloud, cfg: &TrainConfig) -> Result<f64> {
    let d = sinkhorn_divergence(
        mapped,
        target,
        Metric::SqEuclidean,
        Scaling::None,
        cfg.eps_eval,
        &cfg.eval_sinkhorn,
    )?;
    if !d.converged {
        log::warn!("evaluation divergence did not reach its tolerance");
    }
    Ok(d.value)
}
