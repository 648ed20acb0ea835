use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// One affine layer, `h ↦ h W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter-shaped container, used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(map: &MlpMap) -> Self {
        Self {
            layers: map
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    input: Array2<f64>,
    // input to each layer (post-activation of the previous one)
    activations: Vec<Array2<f64>>,
    // hidden pre-activations, one per non-final layer
    pre: Vec<Array2<f64>>,
}

/// Feed-forward ReLU network with an affine last layer and an optional skip
/// connection that adds the input to the output.
#[derive(Debug, Clone)]
pub struct MlpMap {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
    residual: bool,
    seed: u64,
    cache: Option<ForwardCache>,
}

impl PartialEq for MlpMap {
    fn eq(&self, other: &Self) -> bool {
        self.layer_dims == other.layer_dims
            && self.layers == other.layers
            && self.residual == other.residual
            && self.seed == other.seed
    }
}

fn check_dims(layer_dims: &[usize], residual: bool) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::Config(format!(
            "layer dims must list at least input and output, all positive; got {layer_dims:?}"
        )));
    }
    let (input, output) = (layer_dims[0], *layer_dims.last().unwrap());
    if residual && input != output {
        return Err(Error::Config(format!(
            "a residual connection needs equal input and output dims, got {input} and {output}"
        )));
    }
    Ok(())
}

impl MlpMap {
    /// Orthogonally initialized network: every weight matrix has orthonormal
    /// columns (tall) or rows (wide), drawn from a seeded Gaussian via sign-fixed
    /// QR. Biases start at zero.
    pub fn orthogonal(layer_dims: &[usize], residual: bool, seed: u64) -> Result<Self> {
        check_dims(layer_dims, residual)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer {
                weights: orthogonal_matrix(w[0], w[1], &mut rng),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers,
            residual,
            seed,
            cache: None,
        })
    }

    /// Network from explicit layers; shapes must chain.
    pub fn from_layers(layers: Vec<Layer>, residual: bool, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        let mut dims = vec![layers[0].weights.nrows()];
        for l in &layers {
            if l.weights.nrows() != *dims.last().unwrap() || l.bias.len() != l.weights.ncols() {
                return Err(Error::Config("layer shapes do not chain".into()));
            }
            dims.push(l.weights.ncols());
        }
        check_dims(&dims, residual)?;
        Ok(Self {
            layer_dims: dims,
            layers,
            residual,
            seed,
            cache: None,
        })
    }

    /// Zeroes the final layer, so a residual network starts as the identity.
    pub fn zero_last_layer(&mut self) {
        let last = self.layers.last_mut().unwrap();
        last.weights.fill(0.0);
        last.bias.fill(0.0);
        self.cache = None;
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::SizeMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
        self.cache = None;
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        self.cache = None;
        &mut self.layers
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                left: x.ncols(),
                right: self.input_dim(),
            });
        }
        Ok(())
    }

    /// Forward pass without touching the cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.weights);
            z += &l.bias;
            if k < last {
                z.mapv_inplace(relu);
            }
            h = z;
        }
        if self.residual {
            h += &x;
        }
        Ok(h)
    }

    /// Forward pass that keeps the activations needed by [`MlpMap::backward`].
    pub fn forward(&mut self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.weights);
            z += &l.bias;
            activations.push(h);
            if k < last {
                let a = z.mapv(relu);
                pre.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        if self.residual {
            h += &x;
        }
        self.cache = Some(ForwardCache {
            input: x.to_owned(),
            activations,
            pre,
        });
        Ok(h)
    }

    /// Reverse-mode gradients for the batch seen by the last [`MlpMap::forward`].
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, upstream: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache)?;
        if upstream.nrows() != cache.input.nrows() || upstream.ncols() != self.output_dim() {
            return Err(Error::MissingCache);
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let gw = cache.activations[k].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            let mut prev = delta.dot(&l.weights.t());
            if k > 0 {
                // ReLU'(0) = 0
                Zip::from(&mut prev)
                    .and(&cache.pre[k - 1])
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0
                        }
                    });
            }
            grads.push(Layer {
                weights: gw,
                bias: gb,
            });
            delta = prev;
        }
        grads.reverse();
        if self.residual {
            delta += &upstream;
        }
        Ok((Gradients { layers: grads }, delta))
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `rows × cols` matrix with orthonormal columns (`rows ≥ cols`) or rows.
fn orthogonal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let g = Array2::from_shape_fn((tall, short), |_| rng.sample::<f64, _>(StandardNormal));
    let q = linalg::orthonormal_columns(g.view());
    if rows >= cols {
        q
    } else {
        q.t().to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn zero_map(dims: &[usize], residual: bool) -> MlpMap {
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        MlpMap::from_layers(layers, residual, 0).unwrap()
    }

    #[test]
    fn zero_residual_net_is_identity() {
        let mut m = zero_map(&[3, 8, 3], true);
        let x = array![[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]];
        assert_eq!(m.forward(x.view()).unwrap(), x);
        let mut m = zero_map(&[3, 8, 3], false);
        assert_eq!(m.forward(x.view()).unwrap(), Array2::<f64>::zeros((2, 3)));
    }

    #[test]
    fn identity_linear_layer() {
        let m = MlpMap::from_layers(
            vec![Layer {
                weights: Array2::eye(2),
                bias: Array1::zeros(2),
            }],
            false,
            0,
        )
        .unwrap();
        let x = array![[1.5, -0.5]];
        assert_eq!(m.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn orthogonal_init_properties() {
        let m = MlpMap::orthogonal(&[3, 128, 64, 64, 3], true, 42).unwrap();
        for l in m.layers() {
            let w = &l.weights;
            let defect = if w.nrows() >= w.ncols() {
                linalg::orthogonality_defect(w.view())
            } else {
                linalg::orthogonality_defect(w.t())
            };
            assert!(defect < 1e-6, "{defect}");
            assert!(l.bias.iter().all(|b| *b == 0.0));
        }
        assert_eq!(m, MlpMap::orthogonal(&[3, 128, 64, 64, 3], true, 42).unwrap());
        let sq = MlpMap::orthogonal(&[3, 3], false, 9).unwrap();
        assert!((linalg::determinant(sq.layers()[0].weights.view()).abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn residual_requires_square_io() {
        assert!(matches!(
            MlpMap::orthogonal(&[3, 16, 2], true, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut m = MlpMap::orthogonal(&[3, 4, 3], false, 0).unwrap();
        assert!(m.forward(Array2::zeros((2, 2)).view()).is_err());
    }

    #[test]
    fn backward_needs_cache() {
        let m = MlpMap::orthogonal(&[2, 4, 2], false, 0).unwrap();
        assert!(matches!(m.backward(Array2::zeros((3, 2)).view()), Err(Error::MissingCache)));
        let mut m = m;
        m.forward(Array2::ones((3, 2)).view()).unwrap();
        // batch size changed since the forward pass
        assert!(matches!(m.backward(Array2::zeros((4, 2)).view()), Err(Error::MissingCache)));
        assert!(m.backward(Array2::zeros((3, 2)).view()).is_ok());
    }

    #[test]
    fn linear_regression_gradient() {
        // loss = (1/n) Σ ||x W - y||², dW = 2 Xᵀ (XW - Y) / n
        let w = array![[0.5, -1.0], [2.0, 0.3]];
        let mut m = MlpMap::from_layers(
            vec![Layer {
                weights: w.clone(),
                bias: Array1::zeros(2),
            }],
            false,
            0,
        )
        .unwrap();
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let y = array![[0.0, 1.0], [1.0, 1.0], [-1.0, 2.0]];
        let n = 3.0;
        let out = m.forward(x.view()).unwrap();
        let upstream = (&out - &y) * (2.0 / n);
        let (g, _) = m.backward(upstream.view()).unwrap();
        let expected = x.t().dot(&(x.dot(&w) - &y)) * (2.0 / n);
        for (a, b) in g.layers[0].weights.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut m = MlpMap::orthogonal(&[3, 16, 8, 3], true, 1).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64) - (j as f64) * 0.3);
        m.forward(x.view()).unwrap();
        let (g, gin) = m.backward(Array2::zeros((5, 3)).view()).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(gin.iter().all(|v| *v == 0.0));
    }
}
