//! Temporal-spectral-spatial CNN with hand-written forward and backward passes.

mod checkpoint;
mod gradcheck;
mod layers;
mod network;
mod params;
mod spec;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, tiny_spec, GradientCheck};
pub use network::{
    adam_step, adam_update, build_network, forward, squared_hinge_loss, AdamConfig, BnRunning, NetworkState,
};
pub use params::{Parameters, SeparableParams};
pub use spec::{ArchConfig, NetworkSpec, BN_EPS, BN_MOMENTUM, POOL_SEPARABLE, POOL_SPATIAL, SEPARABLE_KERNEL};
pub use tensor::Tensor;
pub use train::{argmax_rows, inputs_from_dataset, predict, train, TrainConfig, TrainHistory, DESK_EPOCHS, DESK_LR, FULL_EPOCHS};
