//! Loss terms, the Adam optimizer and the training loop.

mod adam;
mod losses;
mod train;

pub use adam::{adam_step, OptimizerState, BETA1, BETA2, EPSILON};
pub use losses::{det2, loss_jacobian, loss_latent, loss_pos, total_loss, Jacobian, LossWeights};
pub use train::{
    derive_seed, train, with_workers, BatchLoss, EpochLoss, JacobianSamplePolicy, TrainConfig,
    Trainer,
};
