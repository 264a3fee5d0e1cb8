//! Minimal feed-forward network engine: dense layers with rectifiers,
//! tempered softmax cross-entropy, SGD with momentum and cosine annealing.

pub mod loss;
mod model;
mod optim;
mod schedule;
mod train;

pub use loss::{cross_entropy_with_grad, loss_and_grad, Targets};
pub use model::{Dense, ForwardCache, Gradients, MlpModel};
pub use optim::{sgd_step, MomentumState};
pub use schedule::cosine_lr;
pub(crate) use train::run_epochs;
pub use train::{evaluate_accuracy, train, EpochStats, TargetMode, TrainConfig, TrainTrace};

/// Layer dims for an MLP with `hidden` layers of `width` units.
pub fn mlp_dims(input: usize, width: usize, hidden: usize, classes: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend(std::iter::repeat_n(width, hidden));
    dims.push(classes);
    dims
}
