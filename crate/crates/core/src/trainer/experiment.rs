//! The synthetic source → reference → target setup and end-to-end runs on it.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::train::{evaluate, pretrain_phi, train_composition, train_direct, TrainLog};
use crate::error::Result;
use crate::geometry::{
    random_rigid, random_shear, sample_shape, PointCloud, RigidTransform, Shape, ShearTransform,
};
use crate::neural::MlpMap;

/// How to generate a source cloud and the two ground-truth transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub shape: Shape,
    /// Training points per cloud.
    pub n_total: usize,
    /// Held-out points per cloud.
    pub n_eval: usize,
    pub noise: f64,
    pub data_seed: u64,
    pub rigid_seed: u64,
    pub translation_scale: f64,
    pub shear_seed: u64,
    pub shear_magnitude: f64,
    /// Compose the shear with a seeded diagonal scaling in `[0.5, 1.5]`.
    pub anisotropic: bool,
}

impl DataSpec {
    /// Default setup for a run seed; every component seed is derived from it.
    pub fn for_seed(seed: u64) -> Self {
        Self {
            shape: Shape::SCurve,
            n_total: 2048,
            n_eval: 1024,
            noise: 0.0,
            data_seed: seed.wrapping_mul(3).wrapping_add(11),
            rigid_seed: seed.wrapping_mul(3).wrapping_add(12),
            translation_scale: 1.0,
            shear_seed: seed.wrapping_mul(3).wrapping_add(13),
            shear_magnitude: 0.5,
            anisotropic: false,
        }
    }
}

/// Source `X`, reference `Z = R X + t` and target `Y = A Z`, for training and held out.
#[derive(Debug, Clone)]
pub struct Tripod {
    pub source: PointCloud,
    pub reference: PointCloud,
    pub target: PointCloud,
    pub source_eval: PointCloud,
    pub reference_eval: PointCloud,
    pub target_eval: PointCloud,
    pub rigid: RigidTransform,
    pub shear: ShearTransform,
}

pub fn build_tripod(spec: &DataSpec) -> Result<Tripod> {
    let d = 3;
    let all = sample_shape(spec.shape, spec.n_total + spec.n_eval, spec.noise, spec.data_seed)?;
    let train_idx: Vec<usize> = (0..spec.n_total).collect();
    let eval_idx: Vec<usize> = (spec.n_total..spec.n_total + spec.n_eval).collect();
    let source = all.select(&train_idx);
    let source_eval = if spec.n_eval > 0 {
        all.select(&eval_idx)
    } else {
        source.clone()
    };
    let rigid = random_rigid(d, spec.translation_scale, spec.rigid_seed)?;
    let mut shear = random_shear(d, spec.shear_magnitude, spec.shear_seed)?;
    if spec.anisotropic {
        shear = shear.with_anisotropic_scaling(spec.shear_seed.wrapping_add(1))?;
    }
    let reference = rigid.apply(&source)?;
    let target = shear.apply(&reference)?;
    let reference_eval = rigid.apply(&source_eval)?;
    let target_eval = shear.apply(&reference_eval)?;
    Ok(Tripod {
        source,
        reference,
        target,
        source_eval,
        reference_eval,
        target_eval,
        rigid,
        shear,
    })
}

fn dims(cfg: &TrainConfig, input: usize, output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend(&cfg.hidden);
    v.push(output);
    v
}

/// Trained networks and their scores.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// `[φ, T]` for the composition, `[T']` for the direct map.
    pub networks: Vec<MlpMap>,
    pub log: TrainLog,
    /// Evaluation divergence on the training clouds.
    pub eval_train: f64,
    /// Evaluation divergence on the held-out clouds.
    pub eval_heldout: f64,
    /// Mapped training source points.
    pub mapped: PointCloud,
    pub mapped_eval: PointCloud,
}

pub fn composition_networks(cfg: &TrainConfig) -> Result<(MlpMap, MlpMap)> {
    let phi = MlpMap::orthogonal(&dims(cfg, 3, 3), true, cfg.derived_seed(101))?;
    let tmap = MlpMap::orthogonal(&dims(cfg, 3, 3), false, cfg.derived_seed(102))?;
    Ok((phi, tmap))
}

pub fn direct_network(cfg: &TrainConfig) -> Result<MlpMap> {
    MlpMap::orthogonal(&dims(cfg, 3, 3), false, cfg.derived_seed(103))
}

/// Pre-trains `φ`, runs the composition loops and scores `T ∘ φ`. The networks
/// are updated in place, so on error they hold the last successful step.
pub fn run_composition(
    tripod: &Tripod,
    cfg: &TrainConfig,
    phi: &mut MlpMap,
    tmap: &mut MlpMap,
) -> Result<RunOutcome> {
    let mut log = pretrain_phi(phi, &tripod.source, &tripod.reference, cfg, cfg.pretrain_iters)?;
    log.extend(train_composition(
        phi,
        tmap,
        &tripod.source,
        &tripod.reference,
        &tripod.target,
        cfg,
    )?);
    let apply = |x: &PointCloud| -> Result<PointCloud> {
        let z = phi.predict(x.points())?;
        PointCloud::new(tmap.predict(z.view())?)
    };
    let mapped = apply(&tripod.source)?;
    let mapped_eval = apply(&tripod.source_eval)?;
    Ok(RunOutcome {
        eval_train: evaluate(&mapped, &tripod.target, cfg)?,
        eval_heldout: evaluate(&mapped_eval, &tripod.target_eval, cfg)?,
        networks: vec![phi.clone(), tmap.clone()],
        log,
        mapped,
        mapped_eval,
    })
}

/// Trains the direct baseline for `cfg.direct_iters` steps and scores it.
pub fn run_direct(tripod: &Tripod, cfg: &TrainConfig, net: &mut MlpMap) -> Result<RunOutcome> {
    let log = train_direct(net, &tripod.source, &tripod.target, cfg, cfg.direct_iters)?;
    let mapped = PointCloud::new(net.predict(tripod.source.points())?)?;
    let mapped_eval = PointCloud::new(net.predict(tripod.source_eval.points())?)?;
    Ok(RunOutcome {
        eval_train: evaluate(&mapped, &tripod.target, cfg)?,
        eval_heldout: evaluate(&mapped_eval, &tripod.target_eval, cfg)?,
        networks: vec![net.clone()],
        log,
        mapped,
        mapped_eval,
    })
}
