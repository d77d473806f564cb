//! Losses, backpropagation, gradient checking, Adam training, distillation
//! and per-class evaluation.

pub mod backward;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod optim;
mod train;

use thiserror::Error;

use crate::encoding::Mode;
use crate::nncore::ModelError;

pub use backward::{backward, backward_scaled, batch_loss, forward_trace, Gradients};
pub use eval::{evaluate, ClassMetrics, EvalReport};
pub use gradcheck::{compare_gradients, grad_check, relative_error, GradCheckReport};
pub use loss::{cross_entropy, distill_loss, loss_and_grad, soft_kl, SoftTarget, Target};
pub use optim::Adam;
pub use train::{distill, distill_with, mean_kl, train, train_with, EpochLoss, Hyperparams, TrainOutcome};

/// Stream for weight initialization, see [`crate::seeded_rng`].
pub const INIT_STREAM: u64 = 10;

/// Acceptance threshold for [`grad_check`].
pub const GRAD_CHECK_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (learning rate {learning_rate})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        learning_rate: f64,
    },
    #[error("model expects {model} input but got {data}")]
    ModeMismatch { model: Mode, data: Mode },
    #[error(transparent)]
    Model(#[from] ModelError),
}
