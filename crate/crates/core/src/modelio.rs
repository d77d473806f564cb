//! Versioned JSON model files.
//!
//! A model file is a single JSON object with fields in this order:
//!
//! ```text
//! format_version   integer, currently 1
//! mode             "lastname" | "fullname"
//! input_length     10 | 20, must agree with mode
//! dictionary       the 29 symbols in index order ("E", "a".."z", " ", "U")
//! class_names      ["asian", "black", "hispanic", "white"]
//! layers           array of layer records, see below
//! ```
//!
//! Layer records are tagged by `kind`:
//!
//! ```text
//! {"kind":"embedding","vocab":29,"dim":D,"table":[29*D]}
//! {"kind":"bilstm","input":D,"hidden":H,"return_sequences":bool,
//!  "forward":{"w":[4H*D],"u":[4H*H],"b":[4H]},"backward":{...}}
//! {"kind":"dense","input":I,"units":4,"activation":"softmax","w":[4*I],"b":[4]}
//! ```
//!
//! Matrices are row-major. LSTM gate blocks are stacked input, forget,
//! candidate, output. Weights are stored as 32-bit floats in shortest
//! round-trip decimal form and widened to `f64` on load. Output is compact
//! JSON followed by a newline and is byte-for-byte deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{CharDictionary, Mode, VOCAB_SIZE};
use crate::labels::{CLASS_NAMES, NUM_CLASSES};
use crate::nncore::{
    Activation, BiLstm, Dense, Embedding, LayerSpec, LstmParams, Model, ModelError, ModelSpec, Tensor2,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file is truncated: {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("unsupported format_version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("dictionary does not match the built-in character dictionary")]
    DictionaryMismatch,
    #[error("layer {layer}: dimension mismatch: {detail}")]
    DimMismatch { layer: usize, detail: String },
    #[error("layer {layer}: non-finite weight in `{tensor}`")]
    NonFiniteWeight { layer: usize, tensor: String },
    #[error("invalid model spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
}

/// Checks an architecture, returning every violated rule.
pub fn validate_spec(spec: &ModelSpec) -> Result<(), Vec<String>> {
    let mut violations = Vec::new();
    if spec.class_names.iter().map(String::as_str).ne(CLASS_NAMES) {
        violations.push(format!(
            "class names must be {CLASS_NAMES:?}, got {:?}",
            spec.class_names
        ));
    }
    let layers = &spec.layers;
    match layers.first() {
        Some(LayerSpec::Embedding { vocab, dim }) => {
            if *vocab != VOCAB_SIZE {
                violations.push(format!("embedding vocab must be {VOCAB_SIZE}, got {vocab}"));
            }
            if *dim == 0 {
                violations.push("embedding dim must be positive".into());
            }
        }
        Some(_) => violations.push("first layer must be an embedding".into()),
        None => violations.push("model has no layers".into()),
    }
    match layers.last() {
        Some(LayerSpec::Dense { units, activation }) => {
            if *units != NUM_CLASSES {
                violations.push(format!("output classes must be {NUM_CLASSES}, got {units}"));
            }
            if *activation != Activation::Softmax {
                violations.push("output activation must be softmax".into());
            }
        }
        Some(_) => violations.push("last layer must be dense".into()),
        None => {}
    }
    let middle = if layers.len() >= 2 {
        &layers[1..layers.len() - 1]
    } else {
        &[][..]
    };
    let lstm_count = middle.iter().filter(|l| matches!(l, LayerSpec::BiLstm { .. })).count();
    if lstm_count == 0 {
        violations.push("at least one bilstm layer is required".into());
    }
    for (k, layer) in middle.iter().enumerate() {
        match layer {
            LayerSpec::BiLstm {
                hidden,
                return_sequences,
            } => {
                let is_last = k + 1 == middle.len();
                if *hidden == 0 {
                    violations.push(format!("layer {}: bilstm hidden size must be positive", k + 1));
                }
                if *return_sequences == is_last {
                    violations.push(format!("layer {}: return_sequences must be {}", k + 1, !is_last));
                }
            }
            _ => violations.push(format!(
                "layer {}: only bilstm layers may sit between the embedding and the head",
                k + 1
            )),
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    mode: Mode,
    input_length: usize,
    dictionary: Vec<String>,
    class_names: Vec<String>,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerRecord {
    Embedding {
        vocab: usize,
        dim: usize,
        table: Vec<f64>,
    },
    BiLstm {
        input: usize,
        hidden: usize,
        return_sequences: bool,
        forward: LstmRecord,
        backward: LstmRecord,
    },
    Dense {
        input: usize,
        units: usize,
        activation: Activation,
        w: Vec<f64>,
        b: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
struct LstmRecord {
    w: Vec<f64>,
    u: Vec<f64>,
    b: Vec<f64>,
}

// Serialization goes through these f32 mirrors so numbers are written in
// shortest f32 form.
#[derive(Serialize)]
struct ModelFileOut<'a> {
    format_version: u32,
    mode: Mode,
    input_length: usize,
    dictionary: Vec<String>,
    class_names: &'a [&'a str],
    layers: Vec<LayerOut>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerOut {
    Embedding {
        vocab: usize,
        dim: usize,
        table: Vec<f32>,
    },
    BiLstm {
        input: usize,
        hidden: usize,
        return_sequences: bool,
        forward: LstmOut,
        backward: LstmOut,
    },
    Dense {
        input: usize,
        units: usize,
        activation: Activation,
        w: Vec<f32>,
        b: Vec<f32>,
    },
}

#[derive(Serialize)]
struct LstmOut {
    w: Vec<f32>,
    u: Vec<f32>,
    b: Vec<f32>,
}

fn narrow(values: &[f64], layer: usize, tensor: &str) -> Result<Vec<f32>, ModelIoError> {
    values
        .iter()
        .map(|&v| {
            let n = v as f32;
            if n.is_finite() {
                Ok(n)
            } else {
                Err(ModelIoError::NonFiniteWeight {
                    layer,
                    tensor: tensor.to_string(),
                })
            }
        })
        .collect()
}

fn lstm_out(p: &LstmParams, layer: usize, dir: &str) -> Result<LstmOut, ModelIoError> {
    Ok(LstmOut {
        w: narrow(p.w.data(), layer, &format!("{dir}.w"))?,
        u: narrow(p.u.data(), layer, &format!("{dir}.u"))?,
        b: narrow(&p.b, layer, &format!("{dir}.b"))?,
    })
}

/// Serializes a model to the canonical JSON text.
pub fn to_json_string(model: &Model) -> Result<String, ModelIoError> {
    let mut layers = Vec::with_capacity(model.lstms().len() + 2);
    let table = &model.embedding().table;
    layers.push(LayerOut::Embedding {
        vocab: table.rows(),
        dim: table.cols(),
        table: narrow(table.data(), 0, "table")?,
    });
    for (k, l) in model.lstms().iter().enumerate() {
        let idx = k + 1;
        layers.push(LayerOut::BiLstm {
            input: l.forward.input(),
            hidden: l.hidden(),
            return_sequences: l.return_sequences,
            forward: lstm_out(&l.forward, idx, "forward")?,
            backward: lstm_out(&l.backward, idx, "backward")?,
        });
    }
    let head = model.head();
    let idx = model.lstms().len() + 1;
    layers.push(LayerOut::Dense {
        input: head.w.cols(),
        units: head.w.rows(),
        activation: head.activation,
        w: narrow(head.w.data(), idx, "w")?,
        b: narrow(&head.b, idx, "b")?,
    });
    let file = ModelFileOut {
        format_version: FORMAT_VERSION,
        mode: model.mode(),
        input_length: model.input_length(),
        dictionary: CharDictionary.symbol_strings(),
        class_names: &CLASS_NAMES,
        layers,
    };
    let mut text = serde_json::to_string(&file).map_err(|e| ModelIoError::Malformed(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes `model` to `path`. Nothing is written if any weight is not
/// representable as a finite 32-bit float.
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    let path = path.as_ref();
    let text = to_json_string(model)?;
    fs::write(path, text).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json_str(&text)
}

fn widen(values: Vec<f64>, layer: usize, tensor: &str) -> Result<Vec<f64>, ModelIoError> {
    values
        .into_iter()
        .map(|v| {
            let n = v as f32;
            if n.is_finite() {
                Ok(f64::from(n))
            } else {
                Err(ModelIoError::NonFiniteWeight {
                    layer,
                    tensor: tensor.to_string(),
                })
            }
        })
        .collect()
}

fn matrix(values: Vec<f64>, rows: usize, cols: usize, layer: usize, tensor: &str) -> Result<Tensor2, ModelIoError> {
    let found = values.len();
    let values = widen(values, layer, tensor)?;
    Tensor2::from_vec(rows, cols, values).ok_or_else(|| ModelIoError::DimMismatch {
        layer,
        detail: format!(
            "`{tensor}` should hold {rows}x{cols} = {} values, found {found}",
            rows * cols
        ),
    })
}

fn vector(values: Vec<f64>, len: usize, layer: usize, tensor: &str) -> Result<Vec<f64>, ModelIoError> {
    if values.len() != len {
        return Err(ModelIoError::DimMismatch {
            layer,
            detail: format!("`{tensor}` should hold {len} values, found {}", values.len()),
        });
    }
    widen(values, layer, tensor)
}

fn lstm_in(rec: LstmRecord, input: usize, hidden: usize, layer: usize, dir: &str) -> Result<LstmParams, ModelIoError> {
    Ok(LstmParams {
        w: matrix(rec.w, 4 * hidden, input, layer, &format!("{dir}.w"))?,
        u: matrix(rec.u, 4 * hidden, hidden, layer, &format!("{dir}.u"))?,
        b: vector(rec.b, 4 * hidden, layer, &format!("{dir}.b"))?,
    })
}

/// Parses and fully validates model JSON.
pub fn from_json_str(text: &str) -> Result<Model, ModelIoError> {
    // Check the version before the schema so files from a future format
    // get a precise error rather than a schema complaint.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        if e.classify() == serde_json::error::Category::Eof {
            ModelIoError::Truncated(e.to_string())
        } else {
            ModelIoError::Malformed(e.to_string())
        }
    })?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(found) => return Err(ModelIoError::UnsupportedVersion { found }),
        None => return Err(ModelIoError::Malformed("missing integer `format_version`".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelIoError::Malformed(e.to_string()))?;

    if file.dictionary != CharDictionary.symbol_strings() {
        return Err(ModelIoError::DictionaryMismatch);
    }
    if file.input_length != file.mode.input_length() {
        return Err(ModelIoError::InvalidSpec(vec![format!(
            "input_length {} does not match mode {} (expected {})",
            file.input_length,
            file.mode,
            file.mode.input_length()
        )]));
    }

    let spec = ModelSpec {
        mode: file.mode,
        layers: file
            .layers
            .iter()
            .map(|l| match l {
                LayerRecord::Embedding { vocab, dim, .. } => LayerSpec::Embedding {
                    vocab: *vocab,
                    dim: *dim,
                },
                LayerRecord::BiLstm {
                    hidden,
                    return_sequences,
                    ..
                } => LayerSpec::BiLstm {
                    hidden: *hidden,
                    return_sequences: *return_sequences,
                },
                LayerRecord::Dense { units, activation, .. } => LayerSpec::Dense {
                    units: *units,
                    activation: *activation,
                },
            })
            .collect(),
        class_names: file.class_names,
    };
    validate_spec(&spec).map_err(ModelIoError::InvalidSpec)?;

    let mut embedding = None;
    let mut lstms = Vec::new();
    let mut head = None;
    let mut width = 0;
    for (idx, layer) in file.layers.into_iter().enumerate() {
        match layer {
            LayerRecord::Embedding { vocab, dim, table } => {
                embedding = Some(Embedding {
                    table: matrix(table, vocab, dim, idx, "table")?,
                });
                width = dim;
            }
            LayerRecord::BiLstm {
                input,
                hidden,
                return_sequences,
                forward,
                backward,
            } => {
                if input != width {
                    return Err(ModelIoError::DimMismatch {
                        layer: idx,
                        detail: format!("declared input {input} but previous layer emits {width}"),
                    });
                }
                lstms.push(BiLstm {
                    forward: lstm_in(forward, input, hidden, idx, "forward")?,
                    backward: lstm_in(backward, input, hidden, idx, "backward")?,
                    return_sequences,
                });
                width = 2 * hidden;
            }
            LayerRecord::Dense {
                input,
                units,
                activation,
                w,
                b,
            } => {
                if input != width {
                    return Err(ModelIoError::DimMismatch {
                        layer: idx,
                        detail: format!("declared input {input} but previous layer emits {width}"),
                    });
                }
                head = Some(Dense {
                    w: matrix(w, units, input, idx, "w")?,
                    b: vector(b, units, idx, "b")?,
                    activation,
                });
            }
        }
    }
    // validate_spec guarantees both exist
    let (embedding, head) = (embedding.expect("embedding"), head.expect("head"));
    Model::from_parts(spec.mode, embedding, lstms, head).map_err(|e| match e {
        ModelError::InvalidSpec(v) => ModelIoError::InvalidSpec(v),
        other => ModelIoError::Malformed(other.to_string()),
    })
}

/// Rounds every weight to the nearest `f32`, i.e. what a save/load round
/// trip produces.
pub fn narrow_to_f32(model: &Model) -> Model {
    let mut out = model.clone();
    for p in out.params_mut() {
        for v in p.iter_mut() {
            *v = f64::from(*v as f32);
        }
    }
    out
}
