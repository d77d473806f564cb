//! Dense numeric core and the classifier's forward pass.

mod layers;
mod model;
mod tensor;

use thiserror::Error;

use crate::encoding::Mode;

pub(crate) use layers::LstmKernel;
pub use layers::{
    argmax, bilstm_forward, dense_forward, embedding_forward, log_softmax, log_sum_exp, lstm_cell_step, sigmoid,
    softmax, Activation, LstmParams,
};
pub use model::{BiLstm, Dense, Embedding, LayerSpec, Model, ModelSpec, PreparedModel};
pub use tensor::{axpy, dot, Tensor2};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("model expects {model} input but got {input}")]
    ModeMismatch { model: Mode, input: Mode },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input sequence")]
    EmptySequence,
}
