//! Brute-force ground truth for tiny instances and finite-difference checks.

mod fd;
mod gm;
mod gradcheck;
mod props;

pub use fd::{finite_diff, finite_diff_subset, relative_error};
pub use gradcheck::{
    check_distortion, check_entropic_wasserstein, check_mlp, check_sinkhorn_divergence, gradient_suite,
    GradCheck, DISTORTION_TOL, ENVELOPE_TOL, MLP_TOL,
};
pub use gm::{
    brute_force_gm, brute_force_gm_all, brute_force_ot, gw_cost_naive, next_permutation, permutation_distortion,
    permutation_plan, GmOracleResult, MAX_ORACLE_N,
};
pub use props::{check_decomposition, check_rigid_invariance, DecompositionReport, InvarianceReport, ORACLE_TOL};
