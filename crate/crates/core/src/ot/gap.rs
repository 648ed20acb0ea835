use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::gw::{entropic_gw, gw_objective_grad_cy, GwParams, GwResult};
use crate::error::{Error, Result};
use crate::geometry::{pairwise_cost, CostMatrix, Metric, PointCloud, Scaling};

/// Squared 2-distortion of a map, with its gradient with respect to the mapped points.
#[derive(Debug, Clone)]
pub struct Distortion {
    pub value: f64,
    pub grad_mapped: Array2<f64>,
    /// Intra-space cost of the mapped cloud, as compared against `Cx`.
    pub mapped_cost: CostMatrix,
}

/// `Σ_ij w_i w_j (Cx_ij - Cm_ij)²`, where `Cm` is the intra cost of `mapped` under
/// `metric`/`scaling` and `w` are the mapped weights (so `1/n²` for uniform clouds).
///
/// `cx` must be the cost of the pre-image cloud under the same convention, with
/// row `i` describing the point that maps to row `i` of `mapped`.
pub fn distortion_p2(
    cx: ArrayView2<f64>,
    mapped: &PointCloud,
    metric: Metric,
    scaling: Scaling,
) -> Result<Distortion> {
    let n = mapped.len();
    if cx.dim() != (n, n) {
        return Err(Error::SizeMismatch {
            expected: n,
            got: cx.nrows(),
        });
    }
    let cm = pairwise_cost(mapped, metric, scaling)?;
    let (value, grad_cm) = distortion_of_costs(cx, cm.values(), mapped.weights());
    let grad_mapped = cm.backward_pairwise(mapped.points(), grad_cm.view());
    Ok(Distortion {
        value,
        grad_mapped,
        mapped_cost: cm,
    })
}

/// Value and gradient (with respect to `cm`) of the weighted squared distortion.
pub(crate) fn distortion_of_costs(
    cx: ArrayView2<f64>,
    cm: ArrayView2<f64>,
    w: ndarray::ArrayView1<f64>,
) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(cm.raw_dim());
    let mut value = 0.0;
    Zip::indexed(&mut grad)
        .and(&cx)
        .and(&cm)
        .for_each(|(i, j), g, &x, &y| {
            let ww = w[i] * w[j];
            let d = x - y;
            value += ww * d * d;
            *g = -2.0 * ww * d;
        });
    (value, grad)
}

/// Settings for the Gromov-Monge gap regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub metric: Metric,
    pub scaling: Scaling,
    pub epsilon: f64,
    pub gw: GwParams,
}

impl Default for GapParams {
    fn default() -> Self {
        Self {
            metric: Metric::Euclidean,
            scaling: Scaling::Max,
            epsilon: 1e-3,
            gw: GwParams::default(),
        }
    }
}

/// Gromov-Monge gap of the map `source_i ↦ mapped_i`.
#[derive(Debug, Clone)]
pub struct GmGap {
    /// `distortion - gw.cost`; may be slightly negative.
    pub value: f64,
    pub distortion: f64,
    pub gw: GwResult,
    /// Gradient of `value` with respect to the mapped points (GW plan held fixed).
    pub grad_mapped: Array2<f64>,
}

/// Distortion of the map minus the entropic GW estimate of the GM distance
/// between the source and its image. Both intra costs use `params.metric` and are
/// normalized independently by `params.scaling`.
pub fn gm_gap(source: &PointCloud, mapped: &PointCloud, params: &GapParams) -> Result<GmGap> {
    if source.len() != mapped.len() {
        return Err(Error::SizeMismatch {
            expected: source.len(),
            got: mapped.len(),
        });
    }
    let cx = pairwise_cost(source, params.metric, params.scaling)?;
    gm_gap_with_source_cost(&cx, source, mapped, params)
}

/// [`gm_gap`] with a precomputed source cost.
pub fn gm_gap_with_source_cost(
    cx: &CostMatrix,
    source: &PointCloud,
    mapped: &PointCloud,
    params: &GapParams,
) -> Result<GmGap> {
    let cm = pairwise_cost(mapped, params.metric, params.scaling)?;
    let (distortion, mut grad_cm) =
        distortion_of_costs(cx.values(), cm.values(), mapped.weights());
    let gw = entropic_gw(
        cx.values(),
        cm.values(),
        source.weights(),
        mapped.weights(),
        params.epsilon,
        &params.gw,
    )?;
    let gw_grad = gw_objective_grad_cy(cx.values(), cm.values(), gw.coupling.plan.view());
    grad_cm -= &gw_grad;
    let grad_mapped = cm.backward_pairwise(mapped.points(), grad_cm.view());
    Ok(GmGap {
        value: distortion - gw.cost,
        distortion,
        gw,
        grad_mapped,
    })
}
