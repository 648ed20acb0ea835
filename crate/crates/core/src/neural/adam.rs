use super::mlp::{Gradients, MlpMap};
use crate::error::{Error, Result};

/// Bias-corrected Adam with the usual defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl AdamState {
    pub fn new(map: &MlpMap, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Gradients::zeros_like(map),
            second: Gradients::zeros_like(map),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `map` in place.
    pub fn step(&mut self, map: &mut MlpMap, grads: &Gradients) -> Result<()> {
        let shapes_match = grads.layers.len() == self.first.layers.len()
            && grads.layers.iter().zip(&self.first.layers).all(|(g, m)| {
                g.weights.raw_dim() == m.weights.raw_dim() && g.bias.len() == m.bias.len()
            })
            && map.layers().len() == grads.layers.len();
        if !shapes_match {
            return Err(Error::InvalidInput(
                "gradient shapes do not match the optimizer state".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.eps);
        for (((layer, g), m), v) in map
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(g.bias.iter());
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((p, &g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        if map.layers().iter().any(|l| {
            l.weights.iter().chain(l.bias.iter()).any(|p| !p.is_finite())
        }) {
            return Err(Error::InvalidInput(
                "non-finite parameter after optimizer step".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Gradients;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = MlpMap::orthogonal(&[2, 5, 2], false, 3).unwrap();
        let before = m.params_flat();
        let mut opt = AdamState::new(&m, 1e-3);
        let zero = Gradients::zeros_like(&m);
        opt.step(&mut m, &zero).unwrap();
        assert_eq!(m.params_flat(), before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // after one step m̂ = g and v̂ = g², so Δ = -η g / (|g| + ε)
        let mut m = MlpMap::orthogonal(&[2, 3], false, 3).unwrap();
        let before = m.params_flat();
        let mut g = Gradients::zeros_like(&m);
        for (k, w) in g.layers[0].weights.iter_mut().enumerate() {
            *w = if k % 2 == 0 { 0.7 } else { -2.5 };
        }
        g.layers[0].bias.fill(1e-3);
        let lr = 1e-2;
        let mut opt = AdamState::new(&m, lr);
        opt.step(&mut m, &g).unwrap();
        let gflat: Vec<f64> = g.iter().copied().collect();
        for ((a, b), gi) in m.params_flat().iter().zip(&before).zip(&gflat) {
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert!((a - b - expected).abs() < 1e-15, "{} vs {}", a - b, expected);
        }
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut m = MlpMap::orthogonal(&[2, 3], false, 0).unwrap();
        let other = MlpMap::orthogonal(&[2, 4, 3], false, 0).unwrap();
        let mut opt = AdamState::new(&m, 1e-3);
        assert!(opt.step(&mut m, &Gradients::zeros_like(&other)).is_err());
    }
}
