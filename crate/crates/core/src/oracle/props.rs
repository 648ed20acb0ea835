//! Checks of the two structural facts behind the composition: a rigid
//! relabeling of the source leaves the GM value unchanged, and composing the
//! rigid correspondence with a GM-optimal reference→target bijection attains the
//! source→target optimum.

use serde::{Deserialize, Serialize};

use super::gm::{brute_force_gm, permutation_distortion, MAX_ORACLE_N};
use crate::error::{Error, Result};
use crate::geometry::{pairwise_cost, Metric, PointCloud, RigidTransform, Scaling};

/// Agreement threshold for the oracle equalities.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub gm_source_target: f64,
    pub gm_reference_target: f64,
    pub perm_source_target: Vec<usize>,
    pub perm_reference_target: Vec<usize>,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub direct_optimum: f64,
    pub composed_distortion: f64,
    /// Bijection used for reference→target; composed with the identity relabeling from the rigid map.
    pub composed_permutation: Vec<usize>,
    pub residual: f64,
    pub passed: bool,
}

fn guard(x: &PointCloud, y: &PointCloud) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() > MAX_ORACLE_N {
        return Err(Error::TooLarge {
            n: x.len(),
            limit: MAX_ORACLE_N,
        });
    }
    Ok(())
}

/// Compares `GM(X, Y)` with `GM(R X + t, Y)` on unscaled Euclidean costs.
pub fn check_rigid_invariance(
    source: &PointCloud,
    rigid: &RigidTransform,
    target: &PointCloud,
) -> Result<InvarianceReport> {
    guard(source, target)?;
    let reference = rigid.apply(source)?;
    let cx = pairwise_cost(source, Metric::Euclidean, Scaling::None)?;
    let cz = pairwise_cost(&reference, Metric::Euclidean, Scaling::None)?;
    let cy = pairwise_cost(target, Metric::Euclidean, Scaling::None)?;
    let xy = brute_force_gm(cx.values(), cy.values())?;
    let zy = brute_force_gm(cz.values(), cy.values())?;
    let residual = (xy.best_distortion_sq - zy.best_distortion_sq).abs();
    Ok(InvarianceReport {
        gm_source_target: xy.best_distortion_sq,
        gm_reference_target: zy.best_distortion_sq,
        perm_source_target: xy.best_permutation,
        perm_reference_target: zy.best_permutation,
        residual,
        passed: residual <= ORACLE_TOL,
    })
}

/// Checks that `σ* ∘ φ`, with `φ` the rigid relabeling `x_i ↦ z_i` and `σ*` the
/// GM-optimal bijection from the reference to the target, attains `GM(X, Y)`.
pub fn check_decomposition(
    source: &PointCloud,
    rigid: &RigidTransform,
    target: &PointCloud,
) -> Result<DecompositionReport> {
    guard(source, target)?;
    let reference = rigid.apply(source)?;
    let cx = pairwise_cost(source, Metric::Euclidean, Scaling::None)?;
    let cz = pairwise_cost(&reference, Metric::Euclidean, Scaling::None)?;
    let cy = pairwise_cost(target, Metric::Euclidean, Scaling::None)?;
    let direct = brute_force_gm(cx.values(), cy.values())?;
    let zy = brute_force_gm(cz.values(), cy.values())?;
    // the rigid map sends x_i to z_i, so the composed bijection is σ*(i)
    let composed: Vec<usize> = (0..source.len()).map(|i| zy.best_permutation[i]).collect();
    let composed_distortion = permutation_distortion(cx.values(), cy.values(), &composed);
    let residual = (composed_distortion - direct.best_distortion_sq).abs();
    Ok(DecompositionReport {
        direct_optimum: direct.best_distortion_sq,
        composed_distortion,
        composed_permutation: composed,
        residual,
        passed: residual <= ORACLE_TOL,
    })
}
