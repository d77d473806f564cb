//! Ethnicity prediction from personal names with a character-level
//! bidirectional LSTM.
//!
//! The crate covers the whole pipeline:
//!
//! - [`encoding`]: name normalization and fixed-length index vectors
//! - [`nncore`]: tensors, LSTM/BiLSTM/dense layers and the model forward pass
//! - [`modelio`]: the versioned JSON model format
//! - [`dataprep`]: label cleaning, race × gender undersampling, splitting
//! - [`training`]: losses, backpropagation, gradient checks, Adam training,
//!   distillation and evaluation
//! - [`inference`]: deterministic multi-threaded batch prediction
//!
//! All randomness flows through [`seeded_rng`], a ChaCha8 generator keyed by
//! a `u64` seed and a stream number, so every stage reproduces exactly
//! across platforms.

pub mod dataprep;
pub mod encoding;
pub mod inference;
pub mod labels;
pub mod modelio;
pub mod nncore;
pub mod training;

pub use encoding::{encode, encode_fullname, encode_lastname, normalize, EncodedName, Mode};
pub use inference::{predict_batch, BatchRequest, Prediction};
pub use labels::{Gender, Race, CLASS_NAMES};
pub use modelio::{load_model, save_model};
pub use nncore::{Model, ModelSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every random choice in the crate.
pub type Rng = ChaCha8Rng;

/// ChaCha8 seeded from `seed`, positioned on `stream`. Independent stages
/// use distinct streams so they never share random numbers.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
