//! Analytic gradients of the training losses against central differences.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fd::{finite_diff, relative_error};
use crate::error::Result;
use crate::geometry::{pairwise_cost, Metric, PointCloud, Scaling};
use crate::neural::MlpMap;
use crate::ot::{distortion_p2, entropic_transport, sinkhorn_divergence, SinkhornParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub name: String,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheck {
    fn new(name: &str, analytic: &[f64], numeric: &[f64], tolerance: f64) -> Self {
        let relative_error = relative_error(analytic, numeric);
        Self {
            name: name.to_string(),
            relative_error,
            tolerance,
            passed: relative_error <= tolerance,
        }
    }
}

pub const DISTORTION_TOL: f64 = 1e-6;
pub const ENVELOPE_TOL: f64 = 1e-3;
pub const MLP_TOL: f64 = 1e-5;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn cloud(flat: &[f64], d: usize) -> PointCloud {
    let pts = Array2::from_shape_vec((flat.len() / d, d), flat.to_vec()).expect("flat length");
    PointCloud::new(pts).expect("finite points")
}

/// Squared distortion of a mapped cloud with respect to its positions.
pub fn check_distortion(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = PointCloud::new(gaussian(9, 3, &mut rng))?;
    let y = gaussian(9, 3, &mut rng);
    let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::Max)?;
    let value = |p: &[f64]| {
        distortion_p2(cx.values(), &cloud(p, 3), Metric::Euclidean, Scaling::Max)
            .map(|d| d.value)
            .unwrap_or(f64::NAN)
    };
    let y_flat: Vec<f64> = y.iter().copied().collect();
    let analytic = distortion_p2(cx.values(), &cloud(&y_flat, 3), Metric::Euclidean, Scaling::Max)?;
    let numeric = finite_diff(value, &y_flat, 1e-6);
    let analytic: Vec<f64> = analytic.grad_mapped.iter().copied().collect();
    Ok(GradCheck::new("distortion_p2", &analytic, &numeric, DISTORTION_TOL))
}

fn tight() -> SinkhornParams {
    SinkhornParams {
        max_iter: 100_000,
        tol: 1e-9,
    }
}

/// Sinkhorn divergence (squared Euclidean, mean scaling) with respect to the first cloud.
pub fn check_sinkhorn_divergence(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian(8, 3, &mut rng);
    let b = PointCloud::new(gaussian(7, 3, &mut rng) + 0.5)?;
    let eps = 0.05;
    let value = |p: &[f64]| {
        sinkhorn_divergence(&cloud(p, 3), &b, Metric::SqEuclidean, Scaling::Mean, eps, &tight())
            .map(|d| d.value)
            .unwrap_or(f64::NAN)
    };
    let a_flat: Vec<f64> = a.iter().copied().collect();
    let d = sinkhorn_divergence(&cloud(&a_flat, 3), &b, Metric::SqEuclidean, Scaling::Mean, eps, &tight())?;
    let numeric = finite_diff(value, &a_flat, 1e-5);
    let analytic: Vec<f64> = d.grad_a.iter().copied().collect();
    Ok(GradCheck::new("sinkhorn_divergence", &analytic, &numeric, ENVELOPE_TOL))
}

/// Entropy-included Wasserstein cost (Euclidean, mean scaling) with respect to the source.
pub fn check_entropic_wasserstein(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian(8, 3, &mut rng);
    let b = PointCloud::new(gaussian(8, 3, &mut rng) * 1.5)?;
    let eps = 0.05;
    let value = |p: &[f64]| {
        entropic_transport(&cloud(p, 3), &b, Metric::Euclidean, Scaling::Mean, eps, &tight())
            .map(|r| r.regularized_cost)
            .unwrap_or(f64::NAN)
    };
    let a_flat: Vec<f64> = a.iter().copied().collect();
    let r = entropic_transport(&cloud(&a_flat, 3), &b, Metric::Euclidean, Scaling::Mean, eps, &tight())?;
    let numeric = finite_diff(value, &a_flat, 1e-5);
    let analytic: Vec<f64> = r.grad_source.iter().copied().collect();
    Ok(GradCheck::new("entropic_wasserstein", &analytic, &numeric, ENVELOPE_TOL))
}

/// Backpropagation through a residual MLP for a fixed linear read-out of its output.
pub fn check_mlp(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = MlpMap::orthogonal(&[3, 16, 12, 3], true, seed)?;
    let x = gaussian(10, 3, &mut rng);
    let readout = gaussian(10, 3, &mut rng);
    let params = map.params_flat();
    let mut probe = map.clone();
    let value = |p: &[f64]| {
        probe.set_params_flat(p).expect("same layout");
        let out = probe.predict(x.view()).expect("matching input");
        (&out * &readout).sum()
    };
    let numeric = finite_diff(value, &params, 1e-6);
    map.forward(x.view())?;
    let (grads, _) = map.backward(readout.view())?;
    let analytic: Vec<f64> = grads.iter().copied().collect();
    Ok(GradCheck::new("mlp_backprop", &analytic, &numeric, MLP_TOL))
}

/// Every check above for one seed.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCheck>> {
    Ok(vec![
        check_distortion(seed)?,
        check_sinkhorn_divergence(seed)?,
        check_entropic_wasserstein(seed)?,
        check_mlp(seed)?,
    ])
}

