use ndarray::Array2;

use super::config::TrainConfig;
use crate::error::Result;
use crate::geometry::{CostMatrix, Metric, PointCloud};
use crate::neural::{Gradients, MlpMap};
use crate::ot::{entropic_transport, gm_gap_with_source_cost, sinkhorn_divergence, GapParams};

/// One evaluation of a GM-optimality loss.
#[derive(Debug, Clone)]
pub struct LossEval {
    /// `fitting + λ · gap`.
    pub total: f64,
    pub fitting: f64,
    pub gap: f64,
    pub distortion: f64,
    pub gw_cost: f64,
    pub grads: Gradients,
    /// The fitting solve and the final Sinkhorn solve of the GW term met their
    /// tolerance. The GW outer loop itself runs to its iteration budget.
    pub converged: bool,
}

/// Which discrepancy measures how well the pushed-forward batch fits its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Fit {
    /// Squared-Euclidean Sinkhorn divergence.
    Divergence,
    /// Euclidean entropic Wasserstein cost.
    Wasserstein,
}

/// Loss of the isometry network: Sinkhorn divergence to the reference batch plus
/// `λ` times the GM gap between the source batch and its image.
pub fn loss_phi(
    phi: &mut MlpMap,
    x_batch: &PointCloud,
    z_batch: &PointCloud,
    cfg: &TrainConfig,
) -> Result<LossEval> {
    map_loss(phi, x_batch, z_batch, Fit::Divergence, cfg.eps_fit_phi, cfg)
}

/// Loss of a transport network (`T` on `φ`-mapped batches, or the direct map on
/// source batches): entropic Wasserstein cost to the target batch plus `λ` times
/// the GM gap. The reported fitting value is `⟨C, π⟩`; its gradient is taken from
/// the entropy-included cost at the optimal plan.
pub fn loss_t(
    tmap: &mut MlpMap,
    zprime_batch: &PointCloud,
    y_batch: &PointCloud,
    cfg: &TrainConfig,
) -> Result<LossEval> {
    map_loss(tmap, zprime_batch, y_batch, Fit::Wasserstein, cfg.eps_fit_t, cfg)
}

pub(crate) fn map_loss(
    map: &mut MlpMap,
    source: &PointCloud,
    target: &PointCloud,
    fit: Fit,
    eps_fit: f64,
    cfg: &TrainConfig,
) -> Result<LossEval> {
    let out = map.forward(source.points())?;
    let mapped = PointCloud::new(out)?;

    let (fitting, grad_fit, fit_ok) = match fit {
        Fit::Divergence => {
            let d = sinkhorn_divergence(
                &mapped,
                target,
                Metric::SqEuclidean,
                cfg.scaling_fit,
                eps_fit,
                &cfg.sinkhorn,
            )?;
            (d.value, d.grad_a, d.converged)
        }
        Fit::Wasserstein => {
            let r = entropic_transport(
                &mapped,
                target,
                Metric::Euclidean,
                cfg.scaling_fit,
                eps_fit,
                &cfg.sinkhorn,
            )?;
            (r.cost, r.grad_source, r.coupling.converged)
        }
    };

    let params = GapParams {
        metric: Metric::Euclidean,
        scaling: cfg.scaling_intra,
        epsilon: cfg.eps_gw,
        gw: cfg.gw,
    };
    let cx = CostMatrix::between(source.points(), source.points(), params.metric, params.scaling);
    let gap = gm_gap_with_source_cost(&cx, source, &mapped, &params)?;

    let mut upstream: Array2<f64> = grad_fit;
    upstream.scaled_add(cfg.lambda_gm, &gap.grad_mapped);
    let (grads, _) = map.backward(upstream.view())?;
    let converged = fit_ok && gap.gw.coupling.converged;
    if !converged {
        log::debug!("inner solver stopped at its iteration budget");
    }
    Ok(LossEval {
        total: fitting + cfg.lambda_gm * gap.value,
        fitting,
        gap: gap.value,
        distortion: gap.distortion,
        gw_cost: gap.gw.cost,
        grads,
        converged,
    })
}
