use ndarray::{Array2, ArrayView2, Zip};

use super::sinkhorn::{sinkhorn, Coupling, SinkhornParams};
use crate::error::{Error, Result};
use crate::geometry::{raw_cost_backward, CostMatrix, Metric, PointCloud, Scaling};

/// Entropic OT between two clouds with position gradients.
#[derive(Debug, Clone)]
pub struct OtResult {
    /// `⟨C, π⟩` on the scaled cost, entropy excluded.
    pub cost: f64,
    /// Entropy-included value `⟨C, π⟩ + ε KL(π | a⊗b)`.
    pub regularized_cost: f64,
    pub coupling: Coupling,
    /// Gradient of `regularized_cost` with respect to the source points, taken at the fixed plan.
    pub grad_source: Array2<f64>,
    pub grad_target: Array2<f64>,
}

/// Entropic transport from `source` to `target` under `metric`, with the cross cost
/// normalized by `scaling`.
pub fn entropic_transport(
    source: &PointCloud,
    target: &PointCloud,
    metric: Metric,
    scaling: Scaling,
    epsilon: f64,
    params: &SinkhornParams,
) -> Result<OtResult> {
    let cost = crate::geometry::cross_cost(source, target, metric, scaling)?;
    let coupling = sinkhorn(
        cost.values(),
        source.weights(),
        target.weights(),
        epsilon,
        params,
    )?;
    let (grad_source, grad_target) =
        cost.backward(source.points(), target.points(), coupling.plan.view());
    Ok(OtResult {
        cost: coupling.linear_cost(cost.values()),
        regularized_cost: coupling.regularized_cost(),
        coupling,
        grad_source,
        grad_target,
    })
}

/// Debiased Sinkhorn divergence `OT_ε(a,b) - ½ OT_ε(a,a) - ½ OT_ε(b,b)`.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub value: f64,
    /// Entropy-included costs `[OT(a,b), OT(a,a), OT(b,b)]`.
    pub terms: [f64; 3],
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
    /// All three inner solves met their tolerance.
    pub converged: bool,
    /// Scale applied to all three cost matrices (taken from the cross cost).
    pub scale_factor: f64,
}

/// Sinkhorn divergence between two clouds.
///
/// The three cost matrices share one normalization, computed from the cross
/// cost `C(a, b)` according to `scaling`, so that `S(a, a) = 0` holds exactly and
/// the self terms stay comparable with the cross term.
pub fn sinkhorn_divergence(
    a: &PointCloud,
    b: &PointCloud,
    metric: Metric,
    scaling: Scaling,
    epsilon: f64,
    params: &SinkhornParams,
) -> Result<Divergence> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let cab = crate::geometry::cross_cost(a, b, metric, scaling)?;
    let s = cab.scale_factor();
    let caa = CostMatrix::between(a.points(), a.points(), metric, Scaling::None).into_values() / s;
    let cbb = CostMatrix::between(b.points(), b.points(), metric, Scaling::None).into_values() / s;

    let ab = sinkhorn(cab.values(), a.weights(), b.weights(), epsilon, params)?;
    let aa = sinkhorn(caa.view(), a.weights(), a.weights(), epsilon, params)?;
    let bb = sinkhorn(cbb.view(), b.weights(), b.weights(), epsilon, params)?;
    let terms = [ab.regularized_cost(), aa.regularized_cost(), bb.regularized_cost()];
    let value = terms[0] - 0.5 * terms[1] - 0.5 * terms[2];

    // envelope rule: d OT / d C = π; the shared scale couples the three matrices
    let g_aa = aa.plan.mapv(|p| -0.5 * p);
    let g_bb = bb.plan.mapv(|p| -0.5 * p);
    let extra = inner(g_aa.view(), caa.view()) + inner(g_bb.view(), cbb.view());
    let g_ab_raw = cab.grad_raw_shared(ab.plan.view(), extra);
    let raw_ab = cab.raw_values();
    let (mut grad_a, mut grad_b) =
        raw_cost_backward(a.points(), b.points(), metric, raw_ab.view(), g_ab_raw.view());
    let self_grad = |pts: ArrayView2<f64>, c: &Array2<f64>, g: Array2<f64>| {
        let raw = c * s;
        let g = g / s;
        let (x, y) = raw_cost_backward(pts, pts, metric, raw.view(), g.view());
        x + y
    };
    grad_a += &self_grad(a.points(), &caa, g_aa);
    grad_b += &self_grad(b.points(), &cbb, g_bb);

    Ok(Divergence {
        value,
        terms,
        grad_a,
        grad_b,
        converged: ab.converged && aa.converged && bb.converged,
        scale_factor: s,
    })
}

fn inner(x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    Zip::from(&x).and(&y).fold(0.0, |acc, &p, &q| acc + p * q)
}
