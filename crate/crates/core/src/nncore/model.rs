use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    bilstm_with, dense_forward, embedding_forward, embedding_table_ok, softmax, Activation, LstmKernel, LstmParams,
};
use super::tensor::Tensor2;
use super::ModelError;
use crate::encoding::{EncodedName, Mode, VOCAB_SIZE};
use crate::labels::{CLASS_NAMES, NUM_CLASSES};
use crate::modelio::validate_spec;

/// One entry of a declarative layer list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Embedding { vocab: usize, dim: usize },
    BiLstm { hidden: usize, return_sequences: bool },
    Dense { units: usize, activation: Activation },
}

/// Architecture description: everything about a model except its weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub mode: Mode,
    pub layers: Vec<LayerSpec>,
    pub class_names: Vec<String>,
}

impl ModelSpec {
    /// Embedding of width `dim`, a stack of BiLSTMs, then a softmax head.
    pub fn stacked(mode: Mode, dim: usize, hidden: &[usize]) -> Self {
        let mut layers = vec![LayerSpec::Embedding { vocab: VOCAB_SIZE, dim }];
        for (k, &h) in hidden.iter().enumerate() {
            layers.push(LayerSpec::BiLstm {
                hidden: h,
                return_sequences: k + 1 < hidden.len(),
            });
        }
        layers.push(LayerSpec::Dense {
            units: NUM_CLASSES,
            activation: Activation::Softmax,
        });
        Self {
            mode,
            layers,
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Embedding 256, four BiLSTM layers of 512.
    pub fn teacher(mode: Mode) -> Self {
        Self::stacked(mode, 256, &[512; 4])
    }

    /// Input projection of width 32, two BiLSTM layers of 64.
    pub fn student(mode: Mode) -> Self {
        Self::stacked(mode, 32, &[64; 2])
    }

    /// Scaled-down teacher that trains in seconds.
    pub fn toy_teacher(mode: Mode) -> Self {
        Self::stacked(mode, 16, &[16; 2])
    }

    /// Scaled-down student, small enough for exhaustive gradient checks.
    pub fn toy_student(mode: Mode) -> Self {
        Self::stacked(mode, 8, &[8])
    }

    pub fn input_length(&self) -> usize {
        self.mode.input_length()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `29 × dim`
    pub table: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub return_sequences: bool,
}

impl BiLstm {
    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `units × input`
    pub w: Tensor2,
    pub b: Vec<f64>,
    pub activation: Activation,
}

/// A validated classifier: embedding, stacked BiLSTMs, dense softmax head.
///
/// Weights are immutable once built, so a `Model` can be shared across
/// threads by reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    mode: Mode,
    pub(crate) embedding: Embedding,
    pub(crate) lstms: Vec<BiLstm>,
    pub(crate) head: Dense,
}

impl Model {
    /// Assembles a model from its parts, checking the architecture and
    /// every weight dimension.
    pub fn from_parts(mode: Mode, embedding: Embedding, lstms: Vec<BiLstm>, head: Dense) -> Result<Self, ModelError> {
        let model = Self {
            mode,
            embedding,
            lstms,
            head,
        };
        validate_spec(&model.spec()).map_err(ModelError::InvalidSpec)?;
        model.check_dims()?;
        Ok(model)
    }

    fn check_dims(&self) -> Result<(), ModelError> {
        if !embedding_table_ok(&self.embedding.table) {
            return Err(ModelError::Shape(format!(
                "embedding table is {}x{}, expected {VOCAB_SIZE} rows",
                self.embedding.table.rows(),
                self.embedding.table.cols()
            )));
        }
        let mut width = self.embedding.table.cols();
        for (k, layer) in self.lstms.iter().enumerate() {
            for p in [&layer.forward, &layer.backward] {
                if !p.dims_consistent() || p.input() != width || p.hidden() != layer.hidden() {
                    return Err(ModelError::Shape(format!(
                        "bilstm {k}: expected input {width} and hidden {}",
                        layer.hidden()
                    )));
                }
            }
            width = 2 * layer.hidden();
        }
        if self.head.w.cols() != width || self.head.w.rows() != NUM_CLASSES || self.head.b.len() != NUM_CLASSES {
            return Err(ModelError::Shape(format!(
                "dense head is {}x{} with {} biases, expected {NUM_CLASSES}x{width}",
                self.head.w.rows(),
                self.head.w.cols(),
                self.head.b.len()
            )));
        }
        Ok(())
    }

    /// A model with every weight zero.
    pub fn zeros(spec: &ModelSpec) -> Result<Self, ModelError> {
        validate_spec(spec).map_err(ModelError::InvalidSpec)?;
        let mut dim = 0;
        let mut lstms = Vec::new();
        let mut width = 0;
        for layer in &spec.layers {
            match *layer {
                LayerSpec::Embedding { dim: d, .. } => {
                    dim = d;
                    width = d;
                }
                LayerSpec::BiLstm {
                    hidden,
                    return_sequences,
                } => {
                    lstms.push(BiLstm {
                        forward: LstmParams::zeros(width, hidden),
                        backward: LstmParams::zeros(width, hidden),
                        return_sequences,
                    });
                    width = 2 * hidden;
                }
                LayerSpec::Dense { .. } => {}
            }
        }
        Self::from_parts(
            spec.mode,
            Embedding {
                table: Tensor2::zeros(VOCAB_SIZE, dim),
            },
            lstms,
            Dense {
                w: Tensor2::zeros(NUM_CLASSES, width),
                b: vec![0.0; NUM_CLASSES],
                activation: Activation::Softmax,
            },
        )
    }

    /// Glorot-uniform matrices, zero biases except the forget gate (1.0).
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self, ModelError> {
        let mut model = Self::zeros(spec)?;
        glorot(&mut model.embedding.table, rng);
        for layer in &mut model.lstms {
            for p in [&mut layer.forward, &mut layer.backward] {
                glorot(&mut p.w, rng);
                glorot(&mut p.u, rng);
                let h = p.hidden();
                p.b[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
            }
        }
        glorot(&mut model.head.w, rng);
        Ok(model)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn input_length(&self) -> usize {
        self.mode.input_length()
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn lstms(&self) -> &[BiLstm] {
        &self.lstms
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    /// The architecture this model instantiates.
    pub fn spec(&self) -> ModelSpec {
        let mut layers = vec![LayerSpec::Embedding {
            vocab: self.embedding.table.rows(),
            dim: self.embedding.table.cols(),
        }];
        layers.extend(self.lstms.iter().map(|l| LayerSpec::BiLstm {
            hidden: l.hidden(),
            return_sequences: l.return_sequences,
        }));
        layers.push(LayerSpec::Dense {
            units: self.head.w.rows(),
            activation: self.head.activation,
        });
        ModelSpec {
            mode: self.mode,
            layers,
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Weight tensors in canonical order: embedding table; per BiLSTM the
    /// forward `w, u, b` then backward `w, u, b`; head `w, b`.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.embedding.table.data()];
        for l in &self.lstms {
            for p in [&l.forward, &l.backward] {
                out.push(p.w.data());
                out.push(p.u.data());
                out.push(&p.b);
            }
        }
        out.push(self.head.w.data());
        out.push(&self.head.b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.embedding.table.data_mut()];
        for l in &mut self.lstms {
            for p in [&mut l.forward, &mut l.backward] {
                out.push(p.w.data_mut());
                out.push(p.u.data_mut());
                out.push(&mut p.b);
            }
        }
        out.push(self.head.w.data_mut());
        out.push(&mut self.head.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Pre-softmax scores for an index sequence of any positive length.
    pub fn logits_for_indices(&self, indices: &[u8]) -> Result<Vec<f64>, ModelError> {
        self.prepare().logits_for_indices(indices)
    }

    /// Rearranges the recurrent weights once for repeated forward passes.
    /// Worth it whenever more than one name is scored.
    pub fn prepare(&self) -> PreparedModel<'_> {
        PreparedModel {
            model: self,
            kernels: self
                .lstms
                .iter()
                .map(|l| (l.forward.kernel(), l.backward.kernel()))
                .collect(),
        }
    }

    fn check_input(&self, name: &EncodedName) -> Result<(), ModelError> {
        if name.mode() != self.mode {
            return Err(ModelError::ModeMismatch {
                model: self.mode,
                input: name.mode(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, name: &EncodedName) -> Result<Vec<f64>, ModelError> {
        self.check_input(name)?;
        self.logits_for_indices(name.indices())
    }

    /// Class probabilities in [`CLASS_NAMES`] order.
    pub fn forward(&self, name: &EncodedName) -> Result<[f64; NUM_CLASSES], ModelError> {
        let p = softmax(&self.logits(name)?);
        Ok([p[0], p[1], p[2], p[3]])
    }
}

/// A [`Model`] with its LSTM weights laid out for inference. Results are
/// bitwise identical to the unprepared model. `Sync`, so one instance can
/// serve several threads.
pub struct PreparedModel<'a> {
    model: &'a Model,
    kernels: Vec<(LstmKernel<'a>, LstmKernel<'a>)>,
}

impl<'a> PreparedModel<'a> {
    pub fn model(&self) -> &'a Model {
        self.model
    }

    pub(crate) fn kernels(&self) -> &[(LstmKernel<'a>, LstmKernel<'a>)] {
        &self.kernels
    }

    pub fn logits_for_indices(&self, indices: &[u8]) -> Result<Vec<f64>, ModelError> {
        let m = self.model;
        let mut seq = embedding_forward(indices, &m.embedding.table);
        for (layer, (fk, bk)) in m.lstms.iter().zip(&self.kernels) {
            seq = bilstm_with(&seq, fk, bk, layer.return_sequences)?;
        }
        Ok(dense_forward(seq.row(0), &m.head.w, &m.head.b, Activation::None))
    }

    pub fn logits(&self, name: &EncodedName) -> Result<Vec<f64>, ModelError> {
        self.model.check_input(name)?;
        self.logits_for_indices(name.indices())
    }

    /// Class probabilities in [`CLASS_NAMES`] order.
    pub fn forward(&self, name: &EncodedName) -> Result<[f64; NUM_CLASSES], ModelError> {
        let p = softmax(&self.logits(name)?);
        Ok([p[0], p[1], p[2], p[3]])
    }
}

fn glorot<R: Rng + ?Sized>(t: &mut Tensor2, rng: &mut R) {
    let limit = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.gen_range(-limit..limit);
    }
}
