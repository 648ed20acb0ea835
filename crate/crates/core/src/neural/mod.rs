//! Small MLPs with exact backpropagation and an Adam optimizer.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, LayerRecord};
pub use mlp::{Gradients, Layer, MlpMap};
