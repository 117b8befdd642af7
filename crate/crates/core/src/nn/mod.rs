//! A small differentiable stack: valid 1D convolutions, global average
//! pooling, dense layers, ReLU, a linear output, MSE loss, backpropagation,
//! Adam and Glorot initialisation.
//!
//! Everything is generic over [`Scalar`]; training runs in `f32`, gradient
//! checks in `f64`.

mod layers;
mod network;
mod scalar;
mod train;

pub use layers::{conv1d_forward, global_average_pool, relu, Activation, Conv1dLayer, DenseLayer, Layer};
pub use network::{
    mse_loss, AdamConfig, AdamState, ArchKind, Architecture, Network, NetworkSpec, Workspace,
};
pub use scalar::Scalar;
pub use train::{
    baseline_rmse, evaluate_rmse, gather_batch, predict, rmse_report, train, train_target_mean,
    train_with, EpochRecord, History, RmseReport, TrainConfig, EVAL_CHUNK,
};
