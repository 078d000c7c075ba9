//! Numerical engine for the Q-network: kernels, layers, loss, optimizer,
//! target update and checkpoints. Generic over the float width; training
//! runs in `f32`, the gradient check in `f64`.

mod checkpoint;
pub mod kernels;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, load_for_scenario, save_checkpoint, CheckpointMeta, MAGIC, VERSION};
pub use kernels::elu;
pub use network::{argmax, Arch, QNetwork, QOutput, Workspace, BLOCK_NAMES};
pub use optim::{huber_grad, huber_loss, polyak_update, Adam, AdamConfig};
pub use tensor::{Conv2d, Tensor};
