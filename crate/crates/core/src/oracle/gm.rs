use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest instance the permutation enumeration accepts (8! = 40320 bijections).
pub const MAX_ORACLE_N: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmOracleResult {
    /// `σ` with `x_i ↦ y_σ(i)`; the lexicographically first minimizer.
    pub best_permutation: Vec<usize>,
    pub best_distortion_sq: f64,
    /// Distortion of every bijection, in lexicographic order, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_distortions: Option<Vec<f64>>,
}

/// `(1/n²) Σ_ij (Cx_ij - Cy_σ(i)σ(j))²`.
pub fn permutation_distortion(cx: ArrayView2<f64>, cy: ArrayView2<f64>, perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = cx[[i, j]] - cy[[perm[i], perm[j]]];
            total += d * d;
        }
    }
    total / (n * n) as f64
}

/// Exact discrete Gromov-Monge problem between two uniform clouds of equal size:
/// minimizes the squared distortion over all `n!` bijections.
pub fn brute_force_gm(cx: ArrayView2<f64>, cy: ArrayView2<f64>) -> Result<GmOracleResult> {
    enumerate(cx, cy, false)
}

/// [`brute_force_gm`] that also records the distortion of every bijection.
pub fn brute_force_gm_all(cx: ArrayView2<f64>, cy: ArrayView2<f64>) -> Result<GmOracleResult> {
    enumerate(cx, cy, true)
}

fn enumerate(cx: ArrayView2<f64>, cy: ArrayView2<f64>, keep_all: bool) -> Result<GmOracleResult> {
    let n = cx.nrows();
    if cx.ncols() != n || cy.nrows() != cy.ncols() {
        return Err(Error::InvalidInput("oracle cost matrices must be square".into()));
    }
    if cy.nrows() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: cy.nrows(),
        });
    }
    if n > MAX_ORACLE_N {
        return Err(Error::TooLarge {
            n,
            limit: MAX_ORACLE_N,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_val = f64::INFINITY;
    let mut all = keep_all.then(Vec::new);
    loop {
        let val = permutation_distortion(cx, cy, &perm);
        if let Some(all) = all.as_mut() {
            all.push(val);
        }
        // strict comparison keeps the lexicographically first minimizer
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(GmOracleResult {
        best_permutation: best,
        best_distortion_sq: best_val,
        all_distortions: all,
    })
}

/// Advances to the next permutation in lexicographic order; false after the last.
pub fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exact optimal transport between uniform clouds of equal size. The optimum of
/// the linear program is attained at a vertex of the Birkhoff polytope, so the
/// minimum over bijections of `(1/n) Σ_i C_iσ(i)` is the exact OT cost.
pub fn brute_force_ot(cost: ArrayView2<f64>) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::InvalidInput("exact OT oracle needs a square cost matrix".into()));
    }
    if n > MAX_ORACLE_N {
        return Err(Error::TooLarge {
            n,
            limit: MAX_ORACLE_N,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_val = f64::INFINITY;
    loop {
        let val = perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum::<f64>() / n as f64;
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((best, best_val))
}

/// Coupling of a bijection between uniform clouds: `π_{i,σ(i)} = 1/n`.
pub fn permutation_plan(perm: &[usize]) -> Array2<f64> {
    let n = perm.len();
    let mut plan = Array2::zeros((n, n));
    for (i, &j) in perm.iter().enumerate() {
        plan[[i, j]] = 1.0 / n as f64;
    }
    plan
}

/// Quadratic GW objective by direct summation over all index quadruples.
pub fn gw_cost_naive(cx: ArrayView2<f64>, cy: ArrayView2<f64>, plan: ArrayView2<f64>) -> Result<f64> {
    let (n, m) = plan.dim();
    if cx.dim() != (n, n) {
        return Err(Error::SizeMismatch {
            expected: n,
            got: cx.nrows(),
        });
    }
    if cy.dim() != (m, m) {
        return Err(Error::SizeMismatch {
            expected: m,
            got: cy.nrows(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let pij = plan[[i, j]];
            if pij == 0.0 {
                continue;
            }
            for k in 0..n {
                for l in 0..m {
                    let d = cx[[i, k]] - cy[[j, l]];
                    total += d * d * pij * plan[[k, l]];
                }
            }
        }
    }
    Ok(total)
}
