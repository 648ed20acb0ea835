use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::sinkhorn::{sinkhorn_from, Coupling, SinkhornParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwParams {
    pub outer_iter: usize,
    /// Stop once the L1 change of the plan between outer iterations falls below this.
    pub tol: f64,
    pub sinkhorn: SinkhornParams,
    /// Solve a sequence of coarser problems first, each warm-starting the next,
    /// and spend `outer_iter` on every stage.
    #[serde(default)]
    pub anneal: bool,
}

impl Default for GwParams {
    fn default() -> Self {
        Self {
            outer_iter: 100,
            tol: 1e-6,
            sinkhorn: SinkhornParams::default(),
            anneal: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GwResult {
    /// Quadratic objective `Σ (Cx_ik - Cy_jl)² π_ij π_kl`, entropy excluded.
    pub cost: f64,
    pub coupling: Coupling,
    pub outer_iterations: usize,
    /// Sinkhorn iterations summed over all outer iterations.
    pub inner_iterations: usize,
    pub converged: bool,
}

/// Entropic Gromov-Wasserstein with the squared loss.
///
/// Mirror descent from the product plan `a bᵀ`: each outer step linearizes the
/// quadratic objective at the current plan and solves the resulting entropic OT
/// problem, warm-started from the previous potentials. With `anneal` set the
/// regularization is first raised to about 0.1 and halved stage by stage, which
/// avoids the poor local optima that a direct start at small ε locks into.
pub fn entropic_gw(
    cx: ArrayView2<f64>,
    cy: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    params: &GwParams,
) -> Result<GwResult> {
    let (n, m) = (cx.nrows(), cy.nrows());
    if cx.ncols() != n || cy.ncols() != m {
        return Err(Error::InvalidInput("GW cost matrices must be square".into()));
    }
    if a.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: a.len() });
    }
    if b.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: b.len() });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }

    let cx_sq = cx.mapv(|v| v * v);
    let cy_sq = cy.mapv(|v| v * v);
    let row_const = cx_sq.dot(&a);
    let col_const = cy_sq.dot(&b);

    let mut plan = outer(a, b);
    let mut potentials: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut last: Option<Coupling> = None;
    let mut inner_iterations = 0;
    let mut outer_iterations = 0;
    let mut converged = false;

    let mut stages = vec![epsilon];
    if params.anneal {
        let mut e = epsilon;
        while e * ANNEAL_FACTOR <= ANNEAL_START {
            e *= ANNEAL_FACTOR;
            stages.push(e);
        }
        stages.reverse();
    }
    for &eps in &stages {
        let mut used = 0;
        converged = false;
        while used < params.outer_iter {
            let mut lin = cx.dot(&plan).dot(&cy.t());
            Zip::indexed(&mut lin).for_each(|(i, j), v| *v = row_const[i] + col_const[j] - 2.0 * *v);
            let coupling = sinkhorn_from(
                lin.view(),
                a,
                b,
                eps,
                &params.sinkhorn,
                potentials.as_ref().map(|(f, g)| (f.view(), g.view())),
            )?;
            inner_iterations += coupling.iterations_used;
            used += 1;
            let change: f64 = Zip::from(&coupling.plan)
                .and(&plan)
                .fold(0.0, |acc, &p, &q| acc + (p - q).abs());
            plan.assign(&coupling.plan);
            potentials = Some((coupling.f.clone(), coupling.g.clone()));
            let inner_ok = coupling.converged;
            last = Some(coupling);
            if change < params.tol && inner_ok {
                converged = true;
                break;
            }
        }
        outer_iterations += used;
    }

    let coupling = match last {
        Some(c) => c,
        None => Coupling {
            plan: plan.clone(),
            f: Array1::zeros(n),
            g: Array1::zeros(m),
            epsilon,
            iterations_used: 0,
            converged: false,
            marginal_error: 0.0,
        },
    };
    Ok(GwResult {
        cost: gw_objective(cx, cy, coupling.plan.view()),
        coupling,
        outer_iterations,
        inner_iterations,
        converged,
    })
}

// coarsest stage and ratio between consecutive stages of the annealed solve
const ANNEAL_START: f64 = 0.1;
const ANNEAL_FACTOR: f64 = 2.0;

fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let col = a.insert_axis(Axis(1));
    let row = b.insert_axis(Axis(0));
    &col * &row
}

/// Quadratic GW objective of an arbitrary plan through the factorized contraction
/// `rᵀ Cx² r + cᵀ Cy² c - 2 ⟨Cx π Cyᵀ, π⟩`, where `r`, `c` are the plan's own marginals.
pub fn gw_objective(cx: ArrayView2<f64>, cy: ArrayView2<f64>, plan: ArrayView2<f64>) -> f64 {
    let r = plan.sum_axis(Axis(1));
    let c = plan.sum_axis(Axis(0));
    let cx_sq = cx.mapv(|v| v * v);
    let cy_sq = cy.mapv(|v| v * v);
    let t1 = r.dot(&cx_sq.dot(&r));
    let t2 = c.dot(&cy_sq.dot(&c));
    let cross = cx.dot(&plan).dot(&cy.t());
    let t3 = Zip::from(&cross)
        .and(&plan)
        .fold(0.0, |acc, &x, &p| acc + x * p);
    t1 + t2 - 2.0 * t3
}

/// Gradient of [`gw_objective`] with respect to `Cy` at a fixed plan:
/// `2 Cy ∘ (c cᵀ) - 2 πᵀ Cx π`.
pub fn gw_objective_grad_cy(
    cx: ArrayView2<f64>,
    cy: ArrayView2<f64>,
    plan: ArrayView2<f64>,
) -> Array2<f64> {
    let c = plan.sum_axis(Axis(0));
    let mut grad = plan.t().dot(&cx.dot(&plan));
    Zip::indexed(&mut grad)
        .and(&cy)
        .for_each(|(j, l), g, &y| *g = 2.0 * y * c[j] * c[l] - 2.0 * *g);
    grad
}

/// Gradient of [`gw_objective`] with respect to `Cx` at a fixed plan.
pub fn gw_objective_grad_cx(
    cx: ArrayView2<f64>,
    cy: ArrayView2<f64>,
    plan: ArrayView2<f64>,
) -> Array2<f64> {
    gw_objective_grad_cy(cy, cx, plan.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_point_spaces() {
        let r = entropic_gw(
            array![[0.0]].view(),
            array![[0.0]].view(),
            array![1.0].view(),
            array![1.0].view(),
            0.01,
            &Default::default(),
        )
        .unwrap();
        assert!((r.coupling.plan[[0, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let c = array![[0.0]];
        let w = array![1.0];
        assert!(entropic_gw(c.view(), c.view(), w.view(), w.view(), 0.0, &Default::default()).is_err());
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        let cx = array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]];
        let cy = array![[0.0, 0.7], [0.7, 0.0]];
        let plan = array![[0.2, 0.1], [0.05, 0.3], [0.15, 0.2]];
        let gy = gw_objective_grad_cy(cx.view(), cy.view(), plan.view());
        let gx = gw_objective_grad_cx(cx.view(), cy.view(), plan.view());
        let h = 1e-6;
        for j in 0..2 {
            for l in 0..2 {
                let mut p = cy.clone();
                p[[j, l]] += h;
                let mut q = cy.clone();
                q[[j, l]] -= h;
                let fd = (gw_objective(cx.view(), p.view(), plan.view())
                    - gw_objective(cx.view(), q.view(), plan.view()))
                    / (2.0 * h);
                assert!((fd - gy[[j, l]]).abs() < 1e-8);
            }
        }
        for i in 0..3 {
            for k in 0..3 {
                let mut p = cx.clone();
                p[[i, k]] += h;
                let mut q = cx.clone();
                q[[i, k]] -= h;
                let fd = (gw_objective(p.view(), cy.view(), plan.view())
                    - gw_objective(q.view(), cy.view(), plan.view()))
                    / (2.0 * h);
                assert!((fd - gx[[i, k]]).abs() < 1e-8);
            }
        }
    }
}
