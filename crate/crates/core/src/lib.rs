//! Learning Gromov-Monge transport maps between point clouds that live in
//! incomparable spaces.
//!
//! The learned map is a composition `T ∘ φ`: `φ` is an approximately
//! distance-preserving network onto a reference cloud and `T` transports the
//! reference onto the target. Both are fitted with a loss that adds a
//! Gromov-Monge gap regularizer to a fitting term. Brute-force oracles for small
//! instances live in [`oracle`].

pub mod error;
pub mod geometry;
mod linalg;
pub mod neural;
pub mod oracle;
pub mod ot;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::{CostMatrix, Metric, PointCloud, RigidTransform, Scaling, ShearTransform};
pub use neural::{AdamState, MlpMap};
pub use trainer::{TrainConfig, TrainLog};
