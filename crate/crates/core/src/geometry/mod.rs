//! Point clouds, intra- and cross-space costs, and the synthetic transforms
//! used to build source/reference/target triples.

mod cloud;
mod cost;
pub mod io;
mod shapes;
mod transform;

pub use cloud::PointCloud;
pub use cost::{cross_cost, pairwise_cost, CostMatrix, Metric, Scaling};
pub(crate) use cost::raw_cost_backward;
pub use shapes::{sample_shape, Shape};
pub use transform::{
    random_rigid, random_rotation, random_shear, shear_slot, RigidTransform, ShearTransform,
};
