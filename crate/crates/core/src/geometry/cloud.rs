use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite weighted point set in `R^d`, i.e. an empirical measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl PointCloud {
    /// Uniformly weighted cloud; one row per point.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::with_weights(points, Array1::from_elem(n, 1.0 / n.max(1) as f64))
    }

    pub fn with_weights(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "point cloud must have at least one point and one dimension, got {n}x{d}"
            )));
        }
        if weights.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        if let Some(((i, j), v)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate {v} at point {i}, axis {j}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }

    /// Uniformly weighted cloud made of the rows at `indices` (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let points = self.points.select(Axis(0), indices);
        let n = indices.len();
        PointCloud {
            points,
            weights: Array1::from_elem(n, 1.0 / n as f64),
        }
    }
}
