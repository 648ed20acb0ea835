use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::linalg;

/// `x ↦ R x + t` with `R` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Array2<f64>,
    translation: Array1<f64>,
}

/// `x ↦ A x` with `A` invertible and not orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearTransform {
    matrix: Array2<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Array2<f64>, translation: Array1<f64>) -> Result<Self> {
        let d = rotation.nrows();
        if rotation.ncols() != d {
            return Err(Error::InvalidInput("rotation must be square".into()));
        }
        if translation.len() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: translation.len(),
            });
        }
        let defect = linalg::orthogonality_defect(rotation.view());
        if defect > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthogonal (max |RᵀR - I| = {defect:e})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            rotation: Array2::eye(d),
            translation: Array1::zeros(d),
        }
    }

    pub fn rotation(&self) -> ArrayView2<'_, f64> {
        self.rotation.view()
    }

    pub fn translation(&self) -> ArrayView1<'_, f64> {
        self.translation.view()
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn with_translation(mut self, translation: Array1<f64>) -> Result<Self> {
        if translation.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: translation.len(),
            });
        }
        self.translation = translation;
        Ok(self)
    }

    /// `x ↦ Rᵀ (x - t)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.t().to_owned();
        let t = -rt.dot(&self.translation);
        Self {
            rotation: rt,
            translation: t,
        }
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        if cloud.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: cloud.dim(),
                right: self.dim(),
            });
        }
        let mut out = cloud.points().dot(&self.rotation.t());
        out += &self.translation;
        PointCloud::with_weights(out, cloud.weights().to_owned())
    }
}

impl ShearTransform {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d {
            return Err(Error::InvalidInput("shear matrix must be square".into()));
        }
        let det = linalg::determinant(matrix.view());
        if det.abs() <= 1e-8 {
            return Err(Error::InvalidInput(format!(
                "shear matrix is singular (det = {det:e})"
            )));
        }
        if linalg::orthogonality_defect(matrix.view()) <= 1e-6 {
            return Err(Error::InvalidInput(
                "shear matrix is orthogonal, so the map would be rigid".into(),
            ));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Left-multiplies by a seeded diagonal with entries in `[0.5, 1.5]`.
    pub fn with_anisotropic_scaling(self, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = self.matrix;
        for mut row in m.rows_mut() {
            let s: f64 = rng.random_range(0.5..=1.5);
            row.mapv_inplace(|v| v * s);
        }
        Self::new(m)
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        if cloud.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: cloud.dim(),
                right: self.dim(),
            });
        }
        let out = cloud.points().dot(&self.matrix.t());
        PointCloud::with_weights(out, cloud.weights().to_owned())
    }
}

/// Haar-distributed rotation in `SO(d)` with zero translation.
///
/// Orthonormalizes a seeded Gaussian matrix (sign-fixed QR) and flips one column
/// when needed so that `det R = +1`.
pub fn random_rotation(d: usize, seed: u64) -> Result<RigidTransform> {
    if d < 2 {
        return Err(Error::InvalidInput(format!(
            "random rotations need d >= 2, got {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Array2::from_shape_fn((d, d), |_| rng.sample::<f64, _>(StandardNormal));
    let mut q = linalg::orthonormal_columns(g.view());
    if linalg::determinant(q.view()) < 0.0 {
        q.column_mut(0).mapv_inplace(|v| -v);
    }
    RigidTransform::new(q, Array1::zeros(d))
}

/// Random rotation followed by a translation drawn uniformly from `[-scale, scale]^d`.
pub fn random_rigid(d: usize, translation_scale: f64, seed: u64) -> Result<RigidTransform> {
    let rot = random_rotation(d, seed)?;
    // separate stream so the rotation does not depend on the translation draw
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let t = Array1::from_shape_fn(d, |_| {
        if translation_scale > 0.0 {
            rng.random_range(-translation_scale..=translation_scale)
        } else {
            0.0
        }
    });
    rot.with_translation(t)
}

/// Identity plus a single off-diagonal entry equal to `magnitude`, at a seeded slot.
pub fn random_shear(d: usize, magnitude: f64, seed: u64) -> Result<ShearTransform> {
    if d < 2 {
        return Err(Error::InvalidInput(format!(
            "random shears need d >= 2, got {d}"
        )));
    }
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "shear magnitude must be positive, got {magnitude}"
        )));
    }
    let (row, col) = shear_slot(d, seed);
    let mut m = Array2::eye(d);
    m[[row, col]] = magnitude;
    ShearTransform::new(m)
}

/// Off-diagonal position used by [`random_shear`] for a given seed.
pub fn shear_slot(d: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = rng.random_range(0..d);
    let mut col = rng.random_range(0..d - 1);
    if col >= row {
        col += 1;
    }
    (row, col)
}
