//! Entropic optimal transport, entropic Gromov-Wasserstein, and the
//! distortion-based Gromov-Monge gap, all with position gradients.

mod gap;
mod gw;
mod sinkhorn;
mod transport;

pub use gap::{distortion_p2, gm_gap, gm_gap_with_source_cost, Distortion, GapParams, GmGap};
pub use gw::{entropic_gw, gw_objective, gw_objective_grad_cx, gw_objective_grad_cy, GwParams, GwResult};
pub use sinkhorn::{sinkhorn, sinkhorn_from, Coupling, SinkhornParams};
pub use transport::{entropic_transport, sinkhorn_divergence, Divergence, OtResult};
