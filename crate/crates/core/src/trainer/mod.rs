//! Losses, training loops and evaluation for the composition `T ∘ φ` and the
//! direct baseline.

mod config;
mod experiment;
mod loss;
mod train;

pub use config::{Preset, TrainConfig};
pub use experiment::{
    build_tripod, composition_networks, direct_network, run_composition, run_direct, DataSpec,
    RunOutcome, Tripod,
};
pub use loss::{loss_phi, loss_t, LossEval};
pub use train::{
    evaluate, pretrain_phi, train_composition, train_direct, LogRecord, Stage, TrainLog,
    DIVERGENCE_LIMIT,
};
