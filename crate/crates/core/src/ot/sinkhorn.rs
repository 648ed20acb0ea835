use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iteration budget and stopping rule for [`sinkhorn`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    /// Maximum number of (row, column) update pairs.
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute marginal violation.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-6,
        }
    }
}

/// Entropic transport plan with its dual potentials.
///
/// The plan is `π_ij = a_i b_j exp((f_i + g_j - C_ij) / ε)`.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub plan: Array2<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub epsilon: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Largest absolute violation of either marginal at exit.
    pub marginal_error: f64,
}

impl Coupling {
    pub fn row_sums(&self) -> Array1<f64> {
        self.plan.sum_axis(ndarray::Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.plan.sum_axis(ndarray::Axis(0))
    }

    /// `⟨C, π⟩`.
    pub fn linear_cost(&self, cost: ArrayView2<f64>) -> f64 {
        Zip::from(&self.plan)
            .and(&cost)
            .fold(0.0, |acc, &p, &c| acc + p * c)
    }

    /// `⟨C, π⟩ + ε KL(π | a⊗b)`, written through the potentials.
    pub fn regularized_cost(&self) -> f64 {
        let r = self.row_sums();
        let c = self.col_sums();
        // entries of π with a zero marginal carry no mass; skip their (possibly infinite) potentials
        let fr: f64 = self
            .f
            .iter()
            .zip(&r)
            .filter(|(_, &m)| m > 0.0)
            .map(|(f, m)| f * m)
            .sum();
        let gc: f64 = self
            .g
            .iter()
            .zip(&c)
            .filter(|(_, &m)| m > 0.0)
            .map(|(g, m)| g * m)
            .sum();
        fr + gc
    }
}

// scalings beyond e^LIMIT are folded back into the potentials
const ABSORB_LIMIT: f64 = 30.0;

/// Entropic OT between weights `a` (rows) and `b` (columns) for the cost `C`.
///
/// Iterates the log-domain fixed point. Long runs of updates are carried out as
/// multiplicative scalings of a kernel that has the current potentials absorbed,
/// and the scalings are folded back into the potentials (with an exact log-sum-exp
/// update) whenever they leave a safe range. The scaling updates are over-relaxed,
/// which leaves the fixed point unchanged. Returns with `converged = false`
/// when `max_iter` is exhausted.
pub fn sinkhorn(
    cost: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    params: &SinkhornParams,
) -> Result<Coupling> {
    sinkhorn_from(cost, a, b, epsilon, params, None)
}

/// [`sinkhorn`] started from the given potentials.
pub fn sinkhorn_from(
    cost: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    params: &SinkhornParams,
    init: Option<(ArrayView1<f64>, ArrayView1<f64>)>,
) -> Result<Coupling> {
    let (n, m) = cost.dim();
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    if a.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: a.len() });
    }
    if b.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: b.len() });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
    }
    let cold = !matches!(init, Some((f0, g0)) if f0.len() == n && g0.len() == m);
    let (mut f, mut g) = match init {
        Some((f0, g0)) if !cold => (f0.to_owned(), g0.to_owned()),
        _ => (Array1::zeros(n), Array1::zeros(m)),
    };
    let mut state = State {
        cost,
        a,
        b,
        log_a: a.mapv(f64::ln),
        log_b: b.mapv(f64::ln),
        kernel: Array2::zeros((n, m)),
        u: Array1::ones(n),
        v: Array1::ones(m),
        kv: Array1::zeros(n),
        ktu: Array1::zeros(m),
    };
    let budget = params.max_iter.max(1);
    let mut iters = 0usize;
    if cold {
        // anneal from the cost scale down to the target epsilon
        let spread = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
        let mut eps_k = (spread / 2.0).min(100.0 * epsilon);
        while eps_k > epsilon && iters < budget / 2 {
            let stage_budget = (budget / 2 - iters).min(STAGE_ITERS);
            let (used, _, _) = state.solve(eps_k, params.tol, stage_budget, &mut f, &mut g);
            iters += used;
            absorb(&mut f, &mut g, &state.u, &state.v, eps_k);
            eps_k *= ANNEAL;
        }
    }
    let (used, converged, mut err) = state.solve(epsilon, params.tol, budget - iters, &mut f, &mut g);
    iters += used;
    let State { mut kernel, u, v, .. } = state;
    Zip::indexed(&mut kernel).for_each(|(i, j), p| *p *= u[i] * v[j]);
    let plan = kernel;
    absorb(&mut f, &mut g, &u, &v, epsilon);
    if !converged {
        err = marginal_error(&plan, a, b);
    }
    Ok(Coupling {
        plan,
        f,
        g,
        epsilon,
        iterations_used: iters,
        converged,
        marginal_error: err,
    })
}

const STAGE_ITERS: usize = 25;
const ANNEAL: f64 = 0.5;
// over-relaxation factor, dropped to 1 for the rest of a solve if the error grows
const OVERRELAX: f64 = 1.5;
const DIVERGING: f64 = 2.0;

struct State<'a> {
    cost: ArrayView2<'a, f64>,
    a: ArrayView1<'a, f64>,
    b: ArrayView1<'a, f64>,
    log_a: Array1<f64>,
    log_b: Array1<f64>,
    kernel: Array2<f64>,
    u: Array1<f64>,
    v: Array1<f64>,
    kv: Array1<f64>,
    ktu: Array1<f64>,
}

impl State<'_> {
    /// Runs scaling iterations at `eps` from potentials `(f, g)`. On return the
    /// plan is `kernel ∘ u vᵀ` and `(f, g)` still exclude `u`, `v`.
    fn solve(
        &mut self,
        eps: f64,
        tol: f64,
        budget: usize,
        f: &mut Array1<f64>,
        g: &mut Array1<f64>,
    ) -> (usize, bool, f64) {
        let (n, m) = self.cost.dim();
        let budget = budget.max(1);
        let mut iters = 0usize;
        let mut err;
        let mut refresh = false;
        let mut omega = OVERRELAX;
        let mut prev_err = f64::INFINITY;
        loop {
            if refresh {
                log_update_f(self.cost, self.log_b.view(), g.view(), eps, f);
                log_update_g(self.cost, self.log_a.view(), f.view(), eps, g);
                iters += 1;
            }
            build_kernel(self.cost, self.log_a.view(), self.log_b.view(), f.view(), g.view(), eps, &mut self.kernel);
            self.u.fill(1.0);
            self.v.fill(1.0);
            // column violation of the current (u, v); unknown until v has been updated
            let mut col_err = f64::INFINITY;
            loop {
                matvec(&self.kernel, self.v.view(), &mut self.kv);
                err = col_err;
                let mut degenerate = false;
                for i in 0..n {
                    if self.a[i] > 0.0 && !(self.kv[i] > 0.0 && self.kv[i].is_finite()) {
                        degenerate = true;
                    }
                    err = f64::max(err, (self.u[i] * self.kv[i] - self.a[i]).abs());
                }
                if err < tol {
                    return (iters, true, err);
                }
                if degenerate {
                    absorb(f, g, &self.u, &self.v, eps);
                    refresh = true;
                    break;
                }
                if iters >= budget {
                    return (iters, false, err);
                }
                if err.is_finite() {
                    if err > prev_err * DIVERGING {
                        omega = 1.0;
                    }
                    prev_err = err;
                }
                for i in 0..n {
                    self.u[i] = relaxed(self.u[i], self.a[i], self.kv[i], omega);
                }
                matvec_t(&self.kernel, self.u.view(), &mut self.ktu);
                let mut out_of_range = false;
                col_err = 0.0;
                for j in 0..m {
                    let bj = self.b[j];
                    self.v[j] = relaxed(self.v[j], bj, self.ktu[j], omega);
                    col_err = f64::max(col_err, (self.v[j] * self.ktu[j] - bj).abs());
                    if bj > 0.0 && !(self.v[j].is_finite() && self.v[j].ln().abs() < ABSORB_LIMIT) {
                        out_of_range = true;
                    }
                }
                iters += 1;
                let finite = self.v.iter().chain(&self.u).all(|x| x.is_finite());
                if !finite {
                    refresh = true;
                    break;
                }
                if out_of_range || self.u.iter().any(|&x| x > 0.0 && x.ln().abs() >= ABSORB_LIMIT) {
                    absorb(f, g, &self.u, &self.v, eps);
                    refresh = false;
                    break;
                }
            }
        }
    }
}

/// Over-relaxed scaling update `s^(1-ω) (w / k)^ω`; `ω = 1` is the plain update.
#[inline]
fn relaxed(s: f64, w: f64, k: f64, omega: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let t = w / k;
    if omega == 1.0 {
        t
    } else {
        t * (t / s).powf(omega - 1.0)
    }
}

fn marginal_error(plan: &Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let r = plan.sum_axis(ndarray::Axis(1));
    let c = plan.sum_axis(ndarray::Axis(0));
    let er = r.iter().zip(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let ec = c.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    er.max(ec)
}

fn absorb(f: &mut Array1<f64>, g: &mut Array1<f64>, u: &Array1<f64>, v: &Array1<f64>, eps: f64) {
    for (fi, &ui) in f.iter_mut().zip(u) {
        if ui > 0.0 && ui.is_finite() {
            *fi += eps * ui.ln();
        }
    }
    for (gj, &vj) in g.iter_mut().zip(v) {
        if vj > 0.0 && vj.is_finite() {
            *gj += eps * vj.ln();
        }
    }
}

/// `f_i = -ε log Σ_j b_j exp((g_j - C_ij)/ε)`
fn log_update_f(
    cost: ArrayView2<f64>,
    log_b: ArrayView1<f64>,
    g: ArrayView1<f64>,
    eps: f64,
    f: &mut Array1<f64>,
) {
    let inv = 1.0 / eps;
    let shifted: Vec<f64> = g.iter().zip(log_b).map(|(g, lb)| g * inv + lb).collect();
    for (i, row) in cost.rows().into_iter().enumerate() {
        f[i] = -eps * log_sum_exp(row.iter().zip(&shifted).map(|(c, s)| s - c * inv));
    }
}

/// `g_j = -ε log Σ_i a_i exp((f_i - C_ij)/ε)`
fn log_update_g(
    cost: ArrayView2<f64>,
    log_a: ArrayView1<f64>,
    f: ArrayView1<f64>,
    eps: f64,
    g: &mut Array1<f64>,
) {
    let inv = 1.0 / eps;
    let m = cost.ncols();
    let mut maxes = vec![f64::NEG_INFINITY; m];
    let mut sums = vec![0.0; m];
    let shifted: Vec<f64> = f.iter().zip(log_a).map(|(f, la)| f * inv + la).collect();
    for (i, row) in cost.rows().into_iter().enumerate() {
        let s = shifted[i];
        if s == f64::NEG_INFINITY {
            continue;
        }
        for (j, c) in row.iter().enumerate() {
            let x = s - c * inv;
            if x > maxes[j] {
                // online log-sum-exp: rescale the running sum to the new max
                sums[j] = sums[j] * (maxes[j] - x).exp() + 1.0;
                maxes[j] = x;
            } else {
                sums[j] += (x - maxes[j]).exp();
            }
        }
    }
    for j in 0..m {
        g[j] = -eps * (maxes[j] + sums[j].ln());
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

// log of the smallest kernel entry kept; smaller ones are zeroed so that the
// scaling loop never works on subnormal numbers
const KERNEL_FLOOR: f64 = -200.0;

fn build_kernel(
    cost: ArrayView2<f64>,
    log_a: ArrayView1<f64>,
    log_b: ArrayView1<f64>,
    f: ArrayView1<f64>,
    g: ArrayView1<f64>,
    eps: f64,
    kernel: &mut Array2<f64>,
) {
    let inv = 1.0 / eps;
    let col: Vec<f64> = g.iter().zip(log_b).map(|(g, lb)| g * inv + lb).collect();
    for ((i, mut krow), crow) in kernel
        .rows_mut()
        .into_iter()
        .enumerate()
        .zip(cost.rows())
    {
        let r = f[i] * inv + log_a[i];
        for ((k, c), s) in krow.iter_mut().zip(crow).zip(&col) {
            let x = r + s - c * inv;
            *k = if x < KERNEL_FLOOR { 0.0 } else { x.exp() };
        }
    }
}

fn matvec(k: &Array2<f64>, v: ArrayView1<f64>, out: &mut Array1<f64>) {
    let vs = v.as_slice().expect("contiguous");
    for (o, row) in out.iter_mut().zip(k.rows()) {
        let row = row.to_slice().expect("contiguous");
        *o = dot(row, vs);
    }
}

fn matvec_t(k: &Array2<f64>, u: ArrayView1<f64>, out: &mut Array1<f64>) {
    out.fill(0.0);
    let os = out.as_slice_mut().expect("contiguous");
    for (&ui, row) in u.iter().zip(k.rows()) {
        if ui == 0.0 {
            continue;
        }
        let row = row.to_slice().expect("contiguous");
        let mut oc = os.chunks_exact_mut(4);
        let mut rc = row.chunks_exact(4);
        for (o, r) in (&mut oc).zip(&mut rc) {
            for l in 0..4 {
                o[l] += ui * r[l];
            }
        }
        for (o, &kij) in oc.into_remainder().iter_mut().zip(rc.remainder()) {
            *o += ui * kij;
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (xs, ys) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] += xs[l] * ys[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_point() {
        let c = sinkhorn(array![[0.0]].view(), array![1.0].view(), array![1.0].view(), 0.5, &Default::default())
            .unwrap();
        assert!((c.plan[[0, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(c.linear_cost(array![[0.0]].view()), 0.0);
        assert!(c.converged);
    }

    #[test]
    fn diagonal_optimum_at_small_epsilon() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let w = array![0.5, 0.5];
        let c = sinkhorn(cost.view(), w.view(), w.view(), 1e-3, &Default::default()).unwrap();
        assert!(c.converged);
        assert!(c.linear_cost(cost.view()) < 1e-12);
        assert!((c.plan[[0, 0]] - 0.5).abs() < 1e-6 && c.plan[[0, 1]] < 1e-12);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let cost = array![[0.0]];
        let w = array![1.0];
        for eps in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                sinkhorn(cost.view(), w.view(), w.view(), eps, &Default::default()),
                Err(Error::NonPositiveEpsilon(_))
            ));
        }
    }

    #[test]
    fn exhausted_budget_is_flagged() {
        let cost = array![[0.0, 1.0, 0.3], [0.2, 0.0, 1.0], [1.0, 0.4, 0.0]];
        let a = array![0.2, 0.3, 0.5];
        let b = array![0.6, 0.2, 0.2];
        let p = SinkhornParams { max_iter: 1, tol: 1e-14 };
        let c = sinkhorn(cost.view(), a.view(), b.view(), 1e-2, &p).unwrap();
        assert!(!c.converged);
        assert!(c.marginal_error > 1e-14);
    }

    #[test]
    fn regularized_cost_matches_primal_formula() {
        let cost = array![[0.1, 0.9, 0.4], [0.7, 0.2, 0.5]];
        let a = array![0.4, 0.6];
        let b = array![0.3, 0.3, 0.4];
        let eps = 0.3;
        let p = SinkhornParams { max_iter: 10_000, tol: 1e-13 };
        let c = sinkhorn(cost.view(), a.view(), b.view(), eps, &p).unwrap();
        let mut primal = 0.0;
        for i in 0..2 {
            for j in 0..3 {
                let pij = c.plan[[i, j]];
                primal += pij * cost[[i, j]] + eps * pij * (pij / (a[i] * b[j])).ln();
            }
        }
        assert!((primal - c.regularized_cost()).abs() < 1e-10);
    }
}
