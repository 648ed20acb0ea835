use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

/// Ground metric between two points of the same space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    SqEuclidean,
}

impl Metric {
    #[inline]
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            Metric::Euclidean => sq.sqrt(),
            Metric::SqEuclidean => sq,
        }
    }
}

/// How a cost matrix is normalized after it is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    None,
    Mean,
    Max,
}

/// A cost matrix together with the normalization that produced it.
///
/// `values` holds the scaled entries; the raw metric values are
/// `values * scale_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Array2<f64>,
    metric: Metric,
    scaling: Scaling,
    scale_factor: f64,
    // row-major first occurrence of the max entry when max scaling was applied
    argmax: Option<(usize, usize)>,
}

/// Intra-space cost of a cloud with itself.
pub fn pairwise_cost(cloud: &PointCloud, metric: Metric, scaling: Scaling) -> Result<CostMatrix> {
    check_finite(cloud.points())?;
    Ok(CostMatrix::between(
        cloud.points(),
        cloud.points(),
        metric,
        scaling,
    ))
}

/// Rectangular cost between two clouds living in the same ambient space.
pub fn cross_cost(
    a: &PointCloud,
    b: &PointCloud,
    metric: Metric,
    scaling: Scaling,
) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    check_finite(a.points())?;
    check_finite(b.points())?;
    Ok(CostMatrix::between(a.points(), b.points(), metric, scaling))
}

fn check_finite(points: ArrayView2<f64>) -> Result<()> {
    match points.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((i, j), v)) => Err(Error::InvalidInput(format!(
            "non-finite coordinate {v} at point {i}, axis {j}"
        ))),
        None => Ok(()),
    }
}

/// Unscaled metric values between the rows of `a` and the rows of `b`.
pub(crate) fn raw_cost(a: ArrayView2<f64>, b: ArrayView2<f64>, metric: Metric) -> Array2<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let a_rows: Vec<Vec<f64>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
    let b_rows: Vec<Vec<f64>> = b.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut out = Array2::zeros((n, m));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let x = &a_rows[i];
        for (j, v) in row.iter_mut().enumerate() {
            *v = metric.eval(x, &b_rows[j]);
        }
    }
    out
}

impl CostMatrix {
    /// Builds the cost between the rows of two coordinate matrices without validation.
    pub(crate) fn between(
        a: ArrayView2<f64>,
        b: ArrayView2<f64>,
        metric: Metric,
        scaling: Scaling,
    ) -> Self {
        Self::from_raw(raw_cost(a, b, metric), metric, scaling)
    }

    pub(crate) fn from_raw(mut raw: Array2<f64>, metric: Metric, scaling: Scaling) -> Self {
        let (factor, argmax) = match scaling {
            Scaling::None => (1.0, None),
            Scaling::Mean => (raw.mean().unwrap_or(0.0), None),
            Scaling::Max => {
                let mut best = (0usize, 0usize);
                let mut max = f64::NEG_INFINITY;
                for ((i, j), &v) in raw.indexed_iter() {
                    if v > max {
                        max = v;
                        best = (i, j);
                    }
                }
                (max, Some(best))
            }
        };
        // degenerate (all-zero) matrices are left unscaled
        let (scaling, factor, argmax) = if scaling != Scaling::None && factor > 0.0 && factor.is_finite() {
            raw.mapv_inplace(|v| v / factor);
            (scaling, factor, argmax)
        } else {
            (Scaling::None, 1.0, None)
        };
        Self {
            values: raw,
            metric,
            scaling,
            scale_factor: factor,
            argmax,
        }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Scaling mode that actually took effect (`None` for a degenerate matrix).
    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Unscaled metric values.
    pub fn raw_values(&self) -> Array2<f64> {
        &self.values * self.scale_factor
    }

    /// Maps a gradient with respect to the scaled entries onto the raw entries,
    /// accounting for the dependence of the scale factor on the entries.
    pub(crate) fn grad_raw(&self, grad: ArrayView2<f64>) -> Array2<f64> {
        self.grad_raw_shared(grad, 0.0)
    }

    /// As [`CostMatrix::grad_raw`] when other matrices were divided by the same
    /// scale factor; `extra` is `Σ G'∘V'` summed over those matrices (scaled values).
    pub(crate) fn grad_raw_shared(&self, grad: ArrayView2<f64>, extra: f64) -> Array2<f64> {
        let s = self.scale_factor;
        let mut out = grad.mapv(|g| g / s);
        let coupling = (Zip::from(&grad)
            .and(&self.values)
            .fold(0.0, |acc, &g, &v| acc + g * v)
            + extra)
            / s;
        match self.scaling {
            Scaling::None => {}
            Scaling::Mean => {
                let share = coupling / (self.values.len() as f64);
                out.mapv_inplace(|g| g - share);
            }
            Scaling::Max => {
                if let Some(idx) = self.argmax {
                    out[idx] -= coupling;
                }
            }
        }
        out
    }

    /// Position gradients of a scalar loss given its gradient with respect to the
    /// scaled entries. `a` and `b` are the coordinates this matrix was built from.
    pub fn backward(
        &self,
        a: ArrayView2<f64>,
        b: ArrayView2<f64>,
        grad: ArrayView2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let g_raw = self.grad_raw(grad);
        let raw = self.raw_values();
        raw_cost_backward(a, b, self.metric, raw.view(), g_raw.view())
    }

    /// Like [`CostMatrix::backward`] for an intra-space matrix built from a single cloud.
    pub fn backward_pairwise(&self, points: ArrayView2<f64>, grad: ArrayView2<f64>) -> Array2<f64> {
        let (ga, gb) = self.backward(points, points, grad);
        ga + gb
    }
}

/// Chains a gradient with respect to raw metric values onto both point sets.
pub(crate) fn raw_cost_backward(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    metric: Metric,
    raw: ArrayView2<f64>,
    grad_raw: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    // d cost_ij / d a_i = w_ij (a_i - b_j), d cost_ij / d b_j = -w_ij (a_i - b_j)
    let w = match metric {
        Metric::SqEuclidean => grad_raw.mapv(|g| 2.0 * g),
        Metric::Euclidean => {
            let mut w = grad_raw.to_owned();
            Zip::from(&mut w).and(&raw).for_each(|w, &d| {
                *w = if d > 0.0 { *w / d } else { 0.0 };
            });
            w
        }
    };
    let row = w.sum_axis(ndarray::Axis(1));
    let col = w.sum_axis(ndarray::Axis(0));
    let mut ga = -w.dot(&b);
    for (i, mut r) in ga.rows_mut().into_iter().enumerate() {
        for (k, v) in r.iter_mut().enumerate() {
            *v += row[i] * a[[i, k]];
        }
    }
    let mut gb = -w.t().dot(&a);
    for (j, mut r) in gb.rows_mut().into_iter().enumerate() {
        for (k, v) in r.iter_mut().enumerate() {
            *v += col[j] * b[[j, k]];
        }
    }
    (ga, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cloud(p: Array2<f64>) -> PointCloud {
        PointCloud::new(p).unwrap()
    }

    #[test]
    fn coincident_points_give_zero_matrix() {
        let c = pairwise_cost(&cloud(array![[1.0, 2.0], [1.0, 2.0]]), Metric::Euclidean, Scaling::Max)
            .unwrap();
        assert_eq!(c.values(), Array2::<f64>::zeros((2, 2)));
        assert_eq!(c.scale_factor(), 1.0);
    }

    #[test]
    fn three_four_five() {
        let pts = cloud(array![[0.0, 0.0], [3.0, 4.0]]);
        let c = pairwise_cost(&pts, Metric::Euclidean, Scaling::None).unwrap();
        assert_eq!(c.values()[[0, 1]], 5.0);
        assert_eq!(c.values()[[1, 0]], 5.0);
        let c = pairwise_cost(&pts, Metric::Euclidean, Scaling::Max).unwrap();
        assert_eq!(c.values()[[0, 1]], 1.0);
        assert_eq!(c.scale_factor(), 5.0);
    }

    #[test]
    fn mean_scaling_normalizes_mean() {
        let pts = cloud(array![[0.0, 0.0], [3.0, 4.0], [1.0, -2.0], [0.5, 0.5]]);
        let c = pairwise_cost(&pts, Metric::SqEuclidean, Scaling::Mean).unwrap();
        assert!((c.values().mean().unwrap() - 1.0).abs() < 1e-9);
        let back = c.raw_values();
        let raw = pairwise_cost(&pts, Metric::SqEuclidean, Scaling::None).unwrap();
        for (x, y) in back.iter().zip(raw.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_cost_small_case() {
        let a = cloud(array![[0.0], [1.0]]);
        let b = cloud(array![[2.0]]);
        let c = cross_cost(&a, &b, Metric::SqEuclidean, Scaling::None).unwrap();
        assert_eq!(c.values(), array![[4.0], [1.0]]);
    }

    #[test]
    fn cross_cost_rejects_dimension_mismatch() {
        let a = cloud(array![[0.0, 1.0]]);
        let b = cloud(array![[2.0]]);
        let err = cross_cost(&a, &b, Metric::Euclidean, Scaling::None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('1'), "{msg}");
    }

    #[test]
    fn non_finite_points_are_rejected() {
        assert!(PointCloud::new(array![[0.0, f64::NAN]]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences_for_each_mode() {
        let a = array![[0.1, 0.2, -0.3], [1.0, 0.4, 0.2], [-0.5, 0.9, 1.1], [0.3, -0.7, 0.0]];
        let b = array![[0.0, 0.5, 0.5], [1.2, -0.1, 0.3], [0.4, 0.4, -0.9]];
        let weights = array![[0.3, -1.0, 0.7], [0.2, 0.1, -0.4], [1.5, 0.0, 0.3], [-0.2, 0.9, 0.6]];
        for metric in [Metric::Euclidean, Metric::SqEuclidean] {
            for scaling in [Scaling::None, Scaling::Mean, Scaling::Max] {
                let f = |a: &Array2<f64>, b: &Array2<f64>| -> f64 {
                    let c = CostMatrix::between(a.view(), b.view(), metric, scaling);
                    (&c.values() * &weights).sum()
                };
                let c = CostMatrix::between(a.view(), b.view(), metric, scaling);
                let (ga, gb) = c.backward(a.view(), b.view(), weights.view());
                let h = 1e-6;
                for ((i, k), g) in ga.indexed_iter() {
                    let mut p = a.clone();
                    p[[i, k]] += h;
                    let mut m = a.clone();
                    m[[i, k]] -= h;
                    let fd = (f(&p, &b) - f(&m, &b)) / (2.0 * h);
                    assert!((fd - g).abs() < 1e-6, "{metric:?} {scaling:?} a[{i},{k}]: {fd} vs {g}");
                }
                for ((j, k), g) in gb.indexed_iter() {
                    let mut p = b.clone();
                    p[[j, k]] += h;
                    let mut m = b.clone();
                    m[[j, k]] -= h;
                    let fd = (f(&a, &p) - f(&a, &m)) / (2.0 * h);
                    assert!((fd - g).abs() < 1e-6, "{metric:?} {scaling:?} b[{j},{k}]: {fd} vs {g}");
                }
            }
        }
    }
}
