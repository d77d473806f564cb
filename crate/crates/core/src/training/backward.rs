//! Reverse-mode gradients through the dense head, every BiLSTM direction
//! (through time) and the embedding table.

use super::loss::{loss_and_grad, Target};
use crate::nncore::{
    axpy, dense_forward, embedding_forward, Activation, LstmKernel, LstmParams, Model, PreparedModel, Tensor2,
};

/// One gradient tensor per model weight tensor, in [`Model::params`] order.
///
/// Internally a zero-initialized copy of the model, so every tensor has the
/// shape of the weight it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Model);

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let mut g = model.clone();
        for p in g.params_mut() {
            p.fill(0.0);
        }
        Self(g)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.0.params()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.0.params_mut()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-position activations of one LSTM direction.
struct DirectionTrace {
    /// Activated gates `[i, f, g, o]`, `T × 4H`.
    gates: Tensor2,
    c: Tensor2,
    h: Tensor2,
}

struct LayerTrace {
    input: Tensor2,
    forward: DirectionTrace,
    backward: DirectionTrace,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardTrace {
    indices: Vec<u8>,
    layers: Vec<LayerTrace>,
    head_input: Vec<f64>,
    pub logits: Vec<f64>,
}

fn trace_direction(seq: &Tensor2, kernel: &LstmKernel<'_>, reverse: bool) -> DirectionTrace {
    let n = kernel.params().hidden();
    let steps = seq.rows();
    let proj = kernel.project_inputs(seq);
    let mut tr = DirectionTrace {
        gates: Tensor2::zeros(steps, 4 * n),
        c: Tensor2::zeros(steps, n),
        h: Tensor2::zeros(steps, n),
    };
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut gates = vec![0.0; 4 * n];
    let (mut h_next, mut c_next) = (vec![0.0; n], vec![0.0; n]);
    for s in 0..steps {
        let t = if reverse { steps - 1 - s } else { s };
        kernel.step(proj.row(t), &h, &c, &mut gates, &mut h_next, &mut c_next);
        std::mem::swap(&mut h, &mut h_next);
        std::mem::swap(&mut c, &mut c_next);
        tr.gates.row_mut(t).copy_from_slice(&gates);
        tr.c.row_mut(t).copy_from_slice(&c);
        tr.h.row_mut(t).copy_from_slice(&h);
    }
    tr
}

/// Forward pass that records the activations needed for backprop.
/// Logits are bitwise identical to [`Model::logits_for_indices`].
pub fn forward_trace(model: &Model, indices: &[u8]) -> ForwardTrace {
    trace_prepared(&model.prepare(), indices)
}

fn trace_prepared(prepared: &PreparedModel<'_>, indices: &[u8]) -> ForwardTrace {
    let model = prepared.model();
    assert!(!indices.is_empty(), "empty input sequence");
    let mut seq = embedding_forward(indices, &model.embedding().table);
    let mut layers = Vec::with_capacity(model.lstms().len());
    for (layer, (fk, bk)) in model.lstms().iter().zip(prepared.kernels()) {
        let fwd = trace_direction(&seq, fk, false);
        let bwd = trace_direction(&seq, bk, true);
        let (nf, steps) = (layer.hidden(), seq.rows());
        let next = if layer.return_sequences {
            let mut out = Tensor2::zeros(steps, 2 * nf);
            for t in 0..steps {
                out.row_mut(t)[..nf].copy_from_slice(fwd.h.row(t));
                out.row_mut(t)[nf..].copy_from_slice(bwd.h.row(t));
            }
            out
        } else {
            let mut out = Tensor2::zeros(1, 2 * nf);
            out.row_mut(0)[..nf].copy_from_slice(fwd.h.row(steps - 1));
            out.row_mut(0)[nf..].copy_from_slice(bwd.h.row(0));
            out
        };
        layers.push(LayerTrace {
            input: seq,
            forward: fwd,
            backward: bwd,
        });
        seq = next;
    }
    let head_input = seq.row(0).to_vec();
    let head = model.head();
    let logits = dense_forward(&head_input, &head.w, &head.b, Activation::None);
    ForwardTrace {
        indices: indices.to_vec(),
        layers,
        head_input,
        logits,
    }
}

/// Backprop through time for one direction. `dh_ext` holds the loss
/// gradient arriving at each position's hidden state from above.
fn backprop_direction(
    p: &LstmParams,
    grad: &mut LstmParams,
    input: &Tensor2,
    tr: &DirectionTrace,
    reverse: bool,
    dh_ext: &Tensor2,
    d_input: &mut Tensor2,
) {
    let n = p.hidden();
    let steps = input.rows();
    let zeros = vec![0.0; n];
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut da = vec![0.0; 4 * n];
    for s in (0..steps).rev() {
        let t = if reverse { steps - 1 - s } else { s };
        let prev = match (s, reverse) {
            (0, _) => None,
            (_, false) => Some(t - 1),
            (_, true) => Some(t + 1),
        };
        let c_prev = prev.map_or(&zeros[..], |q| tr.c.row(q));
        let h_prev = prev.map_or(&zeros[..], |q| tr.h.row(q));
        let gates = tr.gates.row(t);
        let c = tr.c.row(t);
        let ext = dh_ext.row(t);
        for k in 0..n {
            let (i, f, g, o) = (gates[k], gates[n + k], gates[2 * n + k], gates[3 * n + k]);
            let dh = ext[k] + dh_next[k];
            let tc = c[k].tanh();
            let d_o = dh * tc;
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev[k];
            dc_next[k] = dc * f;
            da[k] = di * i * (1.0 - i);
            da[n + k] = df * f * (1.0 - f);
            da[2 * n + k] = dg * (1.0 - g * g);
            da[3 * n + k] = d_o * o * (1.0 - o);
        }
        grad.w.outer_acc(&da, input.row(t));
        grad.u.outer_acc(&da, h_prev);
        axpy(1.0, &da, &mut grad.b);
        p.w.matvec_t_acc(&da, d_input.row_mut(t));
        dh_next.fill(0.0);
        p.u.matvec_t_acc(&da, &mut dh_next);
    }
}

/// Accumulates the gradient of a loss whose derivative with respect to the
/// logits is `d_logits`.
pub fn backprop(model: &Model, trace: &ForwardTrace, d_logits: &[f64], grads: &mut Gradients) {
    let g = &mut grads.0;
    let head = model.head();
    g.head.w.outer_acc(d_logits, &trace.head_input);
    axpy(1.0, d_logits, &mut g.head.b);
    let mut d_head_in = vec![0.0; trace.head_input.len()];
    head.w.matvec_t_acc(d_logits, &mut d_head_in);

    let steps = trace.indices.len();
    let last = model.lstms().len() - 1;
    let nl = model.lstms()[last].hidden();
    let mut d_out = Tensor2::zeros(steps, 2 * nl);
    d_out.row_mut(steps - 1)[..nl].copy_from_slice(&d_head_in[..nl]);
    d_out.row_mut(0)[nl..].copy_from_slice(&d_head_in[nl..]);

    for (l, layer) in model.lstms().iter().enumerate().rev() {
        let tr = &trace.layers[l];
        let n = layer.hidden();
        let mut dh_f = Tensor2::zeros(steps, n);
        let mut dh_b = Tensor2::zeros(steps, n);
        for t in 0..steps {
            dh_f.row_mut(t).copy_from_slice(&d_out.row(t)[..n]);
            dh_b.row_mut(t).copy_from_slice(&d_out.row(t)[n..]);
        }
        let mut d_in = Tensor2::zeros(steps, tr.input.cols());
        let gl = &mut g.lstms[l];
        backprop_direction(
            &layer.forward,
            &mut gl.forward,
            &tr.input,
            &tr.forward,
            false,
            &dh_f,
            &mut d_in,
        );
        backprop_direction(
            &layer.backward,
            &mut gl.backward,
            &tr.input,
            &tr.backward,
            true,
            &dh_b,
            &mut d_in,
        );
        d_out = d_in;
    }
    for (t, &ix) in trace.indices.iter().enumerate() {
        axpy(1.0, d_out.row(t), g.embedding.table.row_mut(ix as usize));
    }
}

/// Mean loss over `batch` and its exact gradient, multiplied by `scale`.
pub fn backward_scaled(model: &Model, batch: &[(&[u8], Target)], scale: f64) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(model);
    let weight = scale / batch.len() as f64;
    let mut total = 0.0;
    let prepared = model.prepare();
    for (indices, target) in batch {
        let trace = trace_prepared(&prepared, indices);
        let (loss, mut d_logits) = loss_and_grad(&trace.logits, target);
        total += loss;
        d_logits.iter_mut().for_each(|v| *v *= weight);
        backprop(model, &trace, &d_logits, &mut grads);
    }
    (scale * total / batch.len() as f64, grads)
}

/// Mean loss over `batch` and its gradient.
///
/// # Panics
///
/// On an empty batch.
pub fn backward(model: &Model, batch: &[(&[u8], Target)]) -> (f64, Gradients) {
    assert!(!batch.is_empty(), "backward on an empty batch");
    backward_scaled(model, batch, 1.0)
}

/// Mean loss over `batch` using the plain forward pass.
pub fn batch_loss(model: &Model, batch: &[(&[u8], Target)]) -> f64 {
    let prepared = model.prepare();
    let total: f64 = batch
        .iter()
        .map(|(indices, target)| {
            let logits = prepared
                .logits_for_indices(indices)
                .expect("batch sequences are non-empty");
            loss_and_grad(&logits, target).0
        })
        .sum();
    total / batch.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Mode;
    use crate::nncore::ModelSpec;
    use crate::seeded_rng;

    fn tiny() -> Model {
        Model::init(&ModelSpec::stacked(Mode::LastName, 3, &[2, 3]), &mut seeded_rng(5, 0)).unwrap()
    }

    #[test]
    fn trace_logits_match_forward() {
        let m = tiny();
        let idx = [3u8, 1, 0, 27, 28];
        assert_eq!(forward_trace(&m, &idx).logits, m.logits_for_indices(&idx).unwrap());
    }

    #[test]
    fn unused_embedding_rows_get_zero_gradient() {
        let m = tiny();
        let idx = [4u8, 9, 4];
        let (_, g) = backward(&m, &[(&idx, Target::hard(1))]);
        let table = g.tensors()[0];
        for row in 0..29 {
            let r = &table[row * 3..row * 3 + 3];
            if row == 4 || row == 9 {
                assert!(r.iter().any(|&v| v != 0.0));
            } else {
                assert!(r.iter().all(|&v| v == 0.0), "row {row}");
            }
        }
    }

    #[test]
    fn loss_scale_is_linear() {
        let m = tiny();
        let idx = [1u8, 2, 3, 4];
        let batch = [(&idx[..], Target::hard(0)), (&idx[1..], Target::hard(3))];
        let (l1, g1) = backward_scaled(&m, &batch, 1.0);
        let (l2, g2) = backward_scaled(&m, &batch, 2.0);
        assert_eq!(l2, 2.0 * l1);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(2.0 * x, *y);
            }
        }
    }

    #[test]
    fn batch_loss_matches_backward_loss() {
        let m = tiny();
        let idx = [7u8, 7, 0];
        let batch = [(&idx[..], Target::hard(2))];
        assert_eq!(backward(&m, &batch).0, batch_loss(&m, &batch));
    }
}
