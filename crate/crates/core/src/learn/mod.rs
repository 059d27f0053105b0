//! Datasets and the Adam training loop with checkpoint hooks.

mod data;
mod hooks;
mod optim;
mod train;
mod trajectory;

pub use data::{
    load_mnist_idx, make_modular_addition, make_piecewise_regression, parse_idx, piecewise_target, randomize_labels,
    Dataset, Split, Targets, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use hooks::{LcHook, RobustHook};
pub use optim::{Adam, AdamConfig, DecayMode};
pub use train::{config_hash, dataset_loss, log_spaced, loss_and_grad, train, CheckpointHook, Loss, TrainConfig};
pub use trajectory::{TrajectoryLog, TrajectoryRow};
