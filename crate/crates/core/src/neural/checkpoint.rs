//! JSON checkpoints: a header (layer dims, residual flag, seed, step) followed
//! by the layer matrices as nested row lists.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Layer, MlpMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub residual: bool,
    pub seed: u64,
    pub step: u64,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// `in × out`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Checkpoint {
    pub fn capture(map: &MlpMap, step: u64) -> Self {
        Self {
            layer_dims: map.layer_dims().to_vec(),
            residual: map.residual(),
            seed: map.seed(),
            step,
            layers: map
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }

    pub fn restore(&self) -> Result<MlpMap> {
        let layers = self
            .layers
            .iter()
            .map(|rec| {
                let rows = rec.weights.len();
                let cols = rec.weights.first().map_or(0, Vec::len);
                let flat: Vec<f64> = rec.weights.iter().flatten().copied().collect();
                let weights = Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| Error::Config(format!("bad checkpoint layer: {e}")))?;
                Ok(Layer {
                    weights,
                    bias: Array1::from(rec.bias.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let map = MlpMap::from_layers(layers, self.residual, self.seed)?;
        if map.layer_dims() != self.layer_dims.as_slice() {
            return Err(Error::Config(
                "checkpoint header disagrees with its layers".into(),
            ));
        }
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
